use std::collections::BTreeMap;

use super::FaceId;
use crate::ndn::Name;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct PitEntry {
    pub name: Name,
    pub in_faces: Vec<(FaceId, u32)>,
    pub expiry: SimTime,
}

impl PitEntry {
    pub fn has_face(&self, face: FaceId) -> bool {
        self.in_faces.iter().any(|(f, _)| *f == face)
    }

    pub fn has_nonce(&self, nonce: u32) -> bool {
        self.in_faces.iter().any(|(_, n)| *n == nonce)
    }

    /// Distinct faces in arrival order.
    pub fn faces(&self) -> Vec<FaceId> {
        let mut out: Vec<FaceId> = Vec::with_capacity(self.in_faces.len());
        for (f, _) in &self.in_faces {
            if !out.contains(f) {
                out.push(*f);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Pit {
    entries: BTreeMap<Name, PitEntry>,
    capacity: usize,
}

impl Pit {
    pub fn new(capacity: usize) -> Self {
        Pit {
            entries: BTreeMap::new(),
            capacity,
        }
    }

    /// Live entry for `name`; an expired entry is removed on access.
    pub fn get_live(&mut self, name: &Name, now: SimTime) -> Option<&mut PitEntry> {
        if self.entries.get(name).is_some_and(|e| e.expiry <= now) {
            self.entries.remove(name);
        }
        self.entries.get_mut(name)
    }

    pub fn get(&self, name: &Name) -> Option<&PitEntry> {
        self.entries.get(name)
    }

    pub fn purge_expired(&mut self, now: SimTime) {
        self.entries.retain(|_, e| e.expiry > now);
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn insert(&mut self, entry: PitEntry) {
        self.entries.insert(entry.name.clone(), entry);
    }

    pub fn remove(&mut self, name: &Name) -> Option<PitEntry> {
        self.entries.remove(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PitEntry> {
        self.entries.values()
    }
}
