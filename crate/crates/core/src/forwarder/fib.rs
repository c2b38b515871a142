use std::collections::BTreeMap;

use super::FaceId;
use crate::ndn::Name;

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub face: FaceId,
    /// Lower is preferred.
    pub priority: u8,
    pub link_quality: f64,
}

impl Route {
    pub fn new(face: FaceId, priority: u8, link_quality: f64) -> Self {
        Route {
            face,
            priority,
            link_quality,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FibEntry {
    pub prefix: Name,
    /// Sorted by (priority, descending link quality, face).
    pub routes: Vec<Route>,
}

/// Prefix default routes. One entry per prefix, never empty.
#[derive(Debug, Clone, Default)]
pub struct Fib {
    entries: BTreeMap<Name, FibEntry>,
}

impl Fib {
    /// Replaces the routes for `prefix`. An empty route list removes the entry.
    pub fn set_routes(&mut self, prefix: Name, mut routes: Vec<Route>) {
        if routes.is_empty() {
            self.entries.remove(&prefix);
            return;
        }
        routes.sort_by(|a, b| {
            a.priority
                .cmp(&b.priority)
                .then(b.link_quality.total_cmp(&a.link_quality))
                .then(a.face.cmp(&b.face))
        });
        routes.dedup_by(|a, b| a.face == b.face);
        self.entries.insert(prefix.clone(), FibEntry { prefix, routes });
    }

    pub fn remove(&mut self, prefix: &Name) {
        self.entries.remove(prefix);
    }

    /// Routes of the longest prefix matching `name`, best first.
    pub fn lookup(&self, name: &Name) -> &[Route] {
        self.entries
            .values()
            .filter(|e| e.prefix.is_prefix_of(name))
            .max_by_key(|e| e.prefix.len())
            .map(|e| e.routes.as_slice())
            .unwrap_or(&[])
    }

    pub fn entry(&self, prefix: &Name) -> Option<&FibEntry> {
        self.entries.get(prefix)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FibEntry> {
        self.entries.values()
    }
}
