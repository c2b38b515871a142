use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ndn::Name;
use crate::time::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NcState {
    /// Waiting for the NAM timer, or parked until a parent appears.
    WaitingDispatch,
    /// NAM sent; waiting for the upstream to pull.
    AwaitingPull,
    /// Every uplink failed; waiting out a back-off interval.
    Retrying,
}

/// Custody record for one content item travelling upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct NcEntry {
    pub name: Name,
    pub prefix: Name,
    pub state: NcState,
    /// Timeouts against the current target.
    pub attempts: u32,
    /// Completed back-off rounds.
    pub overflow: u32,
    pub next_timer: Option<SimTime>,
    pub tried: BTreeSet<NodeId>,
    /// Neighbor the outstanding NAM went to.
    pub target: Option<NodeId>,
    /// Every neighbor advertised to; a Data delivery to one of them
    /// releases the entry.
    pub advertised: BTreeSet<NodeId>,
    /// Generation counter that invalidates superseded timers.
    pub token: u32,
    pub created_at: SimTime,
}

impl NcEntry {
    pub fn new(name: Name, prefix: Name, now: SimTime) -> Self {
        NcEntry {
            name,
            prefix,
            state: NcState::WaitingDispatch,
            attempts: 0,
            overflow: 0,
            next_timer: None,
            tried: BTreeSet::new(),
            target: None,
            advertised: BTreeSet::new(),
            token: 0,
            created_at: now,
        }
    }

    pub fn is_parked(&self) -> bool {
        self.state == NcState::WaitingDispatch && self.next_timer.is_none()
    }

    /// Arms the entry's single timer, superseding any earlier one.
    pub fn arm(&mut self, state: NcState, at: SimTime) -> u32 {
        self.state = state;
        self.next_timer = Some(at);
        self.token = self.token.wrapping_add(1);
        self.token
    }

    pub fn park(&mut self) {
        self.state = NcState::WaitingDispatch;
        self.next_timer = None;
        self.token = self.token.wrapping_add(1);
    }

    /// Forgets retry history so the next dispatch starts from the parent.
    pub fn restart(&mut self) {
        self.attempts = 0;
        self.overflow = 0;
        self.tried.clear();
        self.target = None;
    }
}

/// The NAM cache: bounded set of entries keyed by content name.
#[derive(Debug, Clone, Default)]
pub struct NamCache {
    entries: BTreeMap<Name, NcEntry>,
    capacity: usize,
}

impl NamCache {
    pub fn new(capacity: usize) -> Self {
        NamCache {
            entries: BTreeMap::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &Name) -> Option<&NcEntry> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &Name) -> Option<&mut NcEntry> {
        self.entries.get_mut(name)
    }

    /// Inserts unless full or already present. Returns false when refused.
    pub fn insert(&mut self, entry: NcEntry) -> bool {
        if self.is_full() || self.entries.contains_key(&entry.name) {
            return false;
        }
        self.entries.insert(entry.name.clone(), entry);
        true
    }

    pub fn remove(&mut self, name: &Name) -> Option<NcEntry> {
        self.entries.remove(name)
    }

    pub fn names(&self) -> Vec<Name> {
        self.entries.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &NcEntry> {
        self.entries.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut NcEntry> {
        self.entries.values_mut()
    }
}
