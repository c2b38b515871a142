use std::collections::VecDeque;

use thiserror::Error;

use crate::ndn::{Data, Name};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct CsEntry {
    pub data: Data,
    /// Published content in transit; never evicted while set.
    pub protected: bool,
    pub inserted_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("content store full of protected entries")]
pub struct CsFull;

/// Content store with FIFO eviction among unprotected entries.
#[derive(Debug, Clone)]
pub struct ContentStore {
    entries: VecDeque<CsEntry>,
    capacity: usize,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        ContentStore {
            entries: VecDeque::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Inserts `data`, evicting the oldest unprotected entry when full.
    /// Returns the evicted name, if any. Re-inserting a present name only
    /// upgrades its protection.
    pub fn insert(&mut self, data: Data, protected: bool, now: SimTime) -> Result<Option<Name>, CsFull> {
        if let Some(e) = self.entries.iter_mut().find(|e| e.data.name == data.name) {
            e.protected |= protected;
            return Ok(None);
        }
        let mut evicted = None;
        if self.entries.len() >= self.capacity {
            let victim = self.entries.iter().position(|e| !e.protected).ok_or(CsFull)?;
            evicted = self.entries.remove(victim).map(|e| e.data.name);
        }
        self.entries.push_back(CsEntry {
            data,
            protected,
            inserted_at: now,
        });
        Ok(evicted)
    }

    pub fn get(&self, name: &Name) -> Option<&CsEntry> {
        self.entries.iter().find(|e| &e.data.name == name)
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.get(name).is_some()
    }

    pub fn set_protected(&mut self, name: &Name, protected: bool) {
        if let Some(e) = self.entries.iter_mut().find(|e| &e.data.name == name) {
            e.protected = protected;
        }
    }

    /// Whether a protected insert of a new name would currently succeed.
    pub fn can_protect_one_more(&self) -> bool {
        self.entries.len() < self.capacity || self.entries.iter().any(|e| !e.protected)
    }

    pub fn protected_count(&self) -> usize {
        self.entries.iter().filter(|e| e.protected).count()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CsEntry> {
        self.entries.iter()
    }
}
