//! Per-node NDN data plane: faces, FIB, PIT and a content store with
//! publish protection.

mod cs;
mod fib;
mod pit;

use serde::{Deserialize, Serialize};

pub use cs::{ContentStore, CsEntry, CsFull};
pub use fib::{Fib, FibEntry, Route};
pub use pit::{Pit, PitEntry};

use crate::ndn::{Data, Interest, Name};
use crate::time::SimTime;
use crate::NodeId;

pub const DEFAULT_CS_CAPACITY: usize = 16;
pub const DEFAULT_PIT_CAPACITY: usize = 32;

/// A face is either a link-local neighbor or the local application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaceId {
    App,
    Link(NodeId),
}

impl FaceId {
    pub fn neighbor(self) -> Option<NodeId> {
        match self {
            FaceId::Link(n) => Some(n),
            FaceId::App => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    /// (name, nonce) already pending.
    Duplicate,
    NoRoute,
    PitFull,
    /// Data without a matching PIT entry.
    Unsolicited,
    /// Data whose PIT entry has already expired.
    Expired,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Duplicate => "duplicate",
            DropReason::NoRoute => "no_route",
            DropReason::PitFull => "pit_full",
            DropReason::Unsolicited => "unsolicited",
            DropReason::Expired => "expired",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InterestOutcome {
    /// Content store hit; reply on the arrival face.
    Satisfied(Data),
    /// Added to an existing PIT entry; nothing forwarded.
    Aggregated,
    Forwarded { face: FaceId, interest: Interest },
    /// Pending at the rendezvous for a locally owned prefix.
    Held,
    Dropped(DropReason),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataOutcome {
    /// Send on every listed face; `cs` reports what the insert did.
    Satisfied {
        faces: Vec<FaceId>,
        cs: Result<Option<Name>, CsFull>,
    },
    Dropped(DropReason),
}

#[derive(Debug, Clone)]
pub struct Forwarder {
    pub fib: Fib,
    pub pit: Pit,
    pub cs: ContentStore,
    local_prefixes: Vec<Name>,
}

impl Forwarder {
    pub fn new(cs_capacity: usize, pit_capacity: usize) -> Self {
        Forwarder {
            fib: Fib::default(),
            pit: Pit::new(pit_capacity),
            cs: ContentStore::new(cs_capacity),
            local_prefixes: Vec::new(),
        }
    }

    /// Interests under an owned prefix wait in the PIT instead of being
    /// forwarded.
    pub fn add_local_prefix(&mut self, prefix: Name) {
        if !self.local_prefixes.contains(&prefix) {
            self.local_prefixes.push(prefix);
        }
    }

    pub fn owns(&self, name: &Name) -> bool {
        self.local_prefixes.iter().any(|p| p.is_prefix_of(name))
    }

    pub fn fib_lookup(&self, name: &Name) -> &[crate::forwarder::Route] {
        self.fib.lookup(name)
    }

    fn next_hop(&self, name: &Name, arrival: FaceId) -> Option<FaceId> {
        self.fib
            .lookup(name)
            .iter()
            .map(|r| r.face)
            .find(|f| *f != arrival)
    }

    pub fn process_interest(&mut self, face: FaceId, interest: &Interest, now: SimTime) -> InterestOutcome {
        let name = &interest.name;
        if !name.is_topic_query() {
            if let Some(hit) = self.cs.get(name) {
                return InterestOutcome::Satisfied(hit.data.clone());
            }
        }
        let lifetime_end = now + SimTime::from_millis(interest.lifetime_ms as u64);
        let next = self.next_hop(name, face);
        if let Some(entry) = self.pit.get_live(name, now) {
            if entry.has_nonce(interest.nonce) {
                return InterestOutcome::Dropped(DropReason::Duplicate);
            }
            entry.expiry = entry.expiry.max(lifetime_end);
            if let Some(slot) = entry.in_faces.iter_mut().find(|(f, _)| *f == face) {
                // Same face, fresh nonce: a retransmission travels upstream.
                slot.1 = interest.nonce;
                return match next {
                    Some(out) => InterestOutcome::Forwarded {
                        face: out,
                        interest: interest.clone(),
                    },
                    None => InterestOutcome::Aggregated,
                };
            }
            entry.in_faces.push((face, interest.nonce));
            return InterestOutcome::Aggregated;
        }
        self.pit.purge_expired(now);
        if self.pit.is_full() {
            return InterestOutcome::Dropped(DropReason::PitFull);
        }
        let held = next.is_none() && self.owns(name);
        if next.is_none() && !held {
            return InterestOutcome::Dropped(DropReason::NoRoute);
        }
        self.pit.insert(PitEntry {
            name: name.clone(),
            in_faces: vec![(face, interest.nonce)],
            expiry: lifetime_end,
        });
        match next {
            Some(out) => InterestOutcome::Forwarded {
                face: out,
                interest: interest.clone(),
            },
            None => InterestOutcome::Held,
        }
    }

    /// `protect` marks the cached copy as in-transit published content.
    pub fn process_data(&mut self, _face: FaceId, data: &Data, now: SimTime, protect: bool) -> DataOutcome {
        let existed = self.pit.get(&data.name).is_some();
        let Some(entry) = self.pit.get_live(&data.name, now) else {
            return DataOutcome::Dropped(if existed {
                DropReason::Expired
            } else {
                DropReason::Unsolicited
            });
        };
        // Wireless faces are broadcast media: a neighbor that sent the
        // Data may also be a downstream requester, so the arrival face is
        // not excluded.
        let faces = entry.faces();
        self.pit.remove(&data.name);
        let cs = if data.name.is_topic_query() {
            Ok(None)
        } else {
            self.cs.insert(data.clone(), protect, now)
        };
        DataOutcome::Satisfied { faces, cs }
    }

    /// Registers a one-hop pull for `name` on behalf of the local
    /// replicator and returns the Interest to send. A pending entry gets
    /// the App face added (or its nonce refreshed) instead of a new entry.
    pub fn pull(&mut self, name: &Name, nonce: u32, lifetime_ms: u32, now: SimTime) -> Result<Interest, DropReason> {
        let interest = Interest {
            name: name.clone(),
            nonce,
            lifetime_ms,
        };
        let lifetime_end = now + SimTime::from_millis(lifetime_ms as u64);
        if let Some(entry) = self.pit.get_live(name, now) {
            match entry.in_faces.iter_mut().find(|(f, _)| *f == FaceId::App) {
                Some(slot) => slot.1 = nonce,
                None => entry.in_faces.push((FaceId::App, nonce)),
            }
            entry.expiry = entry.expiry.max(lifetime_end);
            return Ok(interest);
        }
        self.pit.purge_expired(now);
        if self.pit.is_full() {
            return Err(DropReason::PitFull);
        }
        self.pit.insert(PitEntry {
            name: name.clone(),
            in_faces: vec![(FaceId::App, nonce)],
            expiry: lifetime_end,
        });
        Ok(interest)
    }

    /// True when the local replicator has a live pull pending for `name`.
    pub fn pull_pending(&self, name: &Name, now: SimTime) -> bool {
        self.pit
            .get(name)
            .is_some_and(|e| e.expiry > now && e.has_face(FaceId::App))
    }

    pub fn cs_insert(&mut self, data: Data, protected: bool, now: SimTime) -> Result<Option<Name>, CsFull> {
        self.cs.insert(data, protected, now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        s.parse().unwrap()
    }

    fn interest(name: &str, nonce: u32) -> Interest {
        Interest {
            name: n(name),
            nonce,
            lifetime_ms: 4000,
        }
    }

    fn fwd_with_route() -> Forwarder {
        let mut f = Forwarder::new(DEFAULT_CS_CAPACITY, DEFAULT_PIT_CAPACITY);
        f.fib.set_routes(n("/ρ"), vec![Route::new(FaceId::Link(0), 0, 1.0)]);
        f
    }

    #[test]
    fn cs_hit_replies_without_pit() {
        let mut f = fwd_with_route();
        let data = Data::new(n("/ρ/s1/t0"), b"v".to_vec());
        f.cs_insert(data.clone(), false, SimTime::ZERO).unwrap();
        let out = f.process_interest(FaceId::Link(7), &interest("/ρ/s1/t0", 1), SimTime::ZERO);
        assert_eq!(out, InterestOutcome::Satisfied(data));
        assert!(f.pit.is_empty());
    }

    #[test]
    fn aggregation_forwards_once() {
        let mut f = fwd_with_route();
        let a = f.process_interest(FaceId::Link(1), &interest("/ρ/x", 1), SimTime::ZERO);
        let b = f.process_interest(FaceId::Link(2), &interest("/ρ/x", 2), SimTime::ZERO);
        assert!(matches!(a, InterestOutcome::Forwarded { face: FaceId::Link(0), .. }));
        assert_eq!(b, InterestOutcome::Aggregated);
        assert_eq!(f.pit.get(&n("/ρ/x")).unwrap().in_faces.len(), 2);
    }

    #[test]
    fn duplicate_nonce_dropped() {
        let mut f = fwd_with_route();
        f.process_interest(FaceId::Link(1), &interest("/ρ/x", 9), SimTime::ZERO);
        let out = f.process_interest(FaceId::Link(2), &interest("/ρ/x", 9), SimTime::ZERO);
        assert_eq!(out, InterestOutcome::Dropped(DropReason::Duplicate));
    }

    #[test]
    fn same_face_new_nonce_is_retransmitted() {
        let mut f = fwd_with_route();
        f.process_interest(FaceId::Link(1), &interest("/ρ/x", 1), SimTime::ZERO);
        let out = f.process_interest(FaceId::Link(1), &interest("/ρ/x", 2), SimTime::from_millis(10));
        assert!(matches!(out, InterestOutcome::Forwarded { .. }));
        assert_eq!(f.pit.get(&n("/ρ/x")).unwrap().in_faces, [(FaceId::Link(1), 2)]);
    }

    #[test]
    fn no_route_drops_but_owned_prefix_holds() {
        let mut f = Forwarder::new(4, 4);
        let out = f.process_interest(FaceId::Link(1), &interest("/ρ/x", 1), SimTime::ZERO);
        assert_eq!(out, InterestOutcome::Dropped(DropReason::NoRoute));
        f.add_local_prefix(n("/ρ"));
        let out = f.process_interest(FaceId::Link(1), &interest("/ρ/x", 1), SimTime::ZERO);
        assert_eq!(out, InterestOutcome::Held);
        let out = f.process_interest(FaceId::Link(1), &interest("/other/x", 2), SimTime::ZERO);
        assert_eq!(out, InterestOutcome::Dropped(DropReason::NoRoute));
    }

    #[test]
    fn data_fans_out_and_consumes_pit() {
        let mut f = fwd_with_route();
        for (face, nonce) in [(1, 1), (2, 2), (3, 3)] {
            f.process_interest(FaceId::Link(face), &interest("/ρ/x", nonce), SimTime::ZERO);
        }
        let data = Data::new(n("/ρ/x"), b"v".to_vec());
        let out = f.process_data(FaceId::Link(0), &data, SimTime::from_millis(20), false);
        assert_eq!(
            out,
            DataOutcome::Satisfied {
                faces: vec![FaceId::Link(1), FaceId::Link(2), FaceId::Link(3)],
                cs: Ok(None)
            }
        );
        assert!(f.pit.get(&n("/ρ/x")).is_none());
        assert!(f.cs.contains(&n("/ρ/x")));
    }

    #[test]
    fn unsolicited_and_expired_data_dropped() {
        let mut f = fwd_with_route();
        let data = Data::new(n("/ρ/x"), b"v".to_vec());
        assert_eq!(
            f.process_data(FaceId::Link(0), &data, SimTime::ZERO, false),
            DataOutcome::Dropped(DropReason::Unsolicited)
        );
        assert!(f.cs.is_empty());
        f.process_interest(FaceId::Link(1), &interest("/ρ/x", 1), SimTime::ZERO);
        assert_eq!(
            f.process_data(FaceId::Link(0), &data, SimTime::from_millis(4000), false),
            DataOutcome::Dropped(DropReason::Expired)
        );
        assert!(f.cs.is_empty());
    }

    #[test]
    fn pit_overflow_dropped() {
        let mut f = Forwarder::new(4, 2);
        f.fib.set_routes(n("/ρ"), vec![Route::new(FaceId::Link(0), 0, 1.0)]);
        f.process_interest(FaceId::Link(1), &interest("/ρ/a", 1), SimTime::ZERO);
        f.process_interest(FaceId::Link(1), &interest("/ρ/b", 2), SimTime::ZERO);
        let out = f.process_interest(FaceId::Link(1), &interest("/ρ/c", 3), SimTime::ZERO);
        assert_eq!(out, InterestOutcome::Dropped(DropReason::PitFull));
        // Expired entries free their slots.
        let later = SimTime::from_secs(5);
        let out = f.process_interest(FaceId::Link(1), &interest("/ρ/c", 3), later);
        assert!(matches!(out, InterestOutcome::Forwarded { .. }));
    }

    #[test]
    fn pull_registers_local_face_once() {
        let mut f = Forwarder::new(4, 4);
        let name = n("/ρ/x");
        f.pull(&name, 1, 1000, SimTime::ZERO).unwrap();
        assert!(f.pull_pending(&name, SimTime::ZERO));
        f.pull(&name, 2, 1000, SimTime::ZERO).unwrap();
        assert_eq!(f.pit.get(&name).unwrap().in_faces, [(FaceId::App, 2)]);
        let out = f.process_data(FaceId::Link(3), &Data::new(name.clone(), b"v".to_vec()), SimTime::from_millis(12), true);
        assert_eq!(
            out,
            DataOutcome::Satisfied {
                faces: vec![FaceId::App],
                cs: Ok(None)
            }
        );
        assert_eq!(f.cs.protected_count(), 1);
        assert!(!f.pull_pending(&name, SimTime::from_millis(12)));
    }

    #[test]
    fn pull_entry_expires() {
        let mut f = Forwarder::new(4, 4);
        let name = n("/ρ/x");
        f.pull(&name, 1, 1000, SimTime::ZERO).unwrap();
        assert!(!f.pull_pending(&name, SimTime::from_millis(1000)));
    }

    #[test]
    fn topic_replies_not_cached() {
        let mut f = Forwarder::new(4, 4);
        f.add_local_prefix(n("/ρ"));
        let q = n("/ρ/temp").topic_query().unwrap();
        f.process_interest(FaceId::App, &Interest { name: q.clone(), nonce: 1, lifetime_ms: 100 }, SimTime::ZERO);
        let reply = Data {
            name: q,
            meta_names: vec![n("/ρ/a")],
            ..Data::default()
        };
        assert!(matches!(
            f.process_data(FaceId::Link(0), &reply, SimTime::ZERO, false),
            DataOutcome::Satisfied { .. }
        ));
        assert!(f.cs.is_empty());
    }
}
