use crate::forwarder::{FaceId, Route};
use crate::ndn::{Name, Pam, SOLICIT_RANK};
use crate::time::SimTime;
use crate::NodeId;

/// A neighbor that advertised the prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Uplink {
    pub node: NodeId,
    /// Rank the neighbor advertised.
    pub rank: u8,
    pub quality: f64,
    pub last_heard: SimTime,
}

impl Uplink {
    /// Selection order within one version: lower rank, then better link,
    /// then lower node id.
    pub fn better_than(&self, other: &Uplink) -> bool {
        if self.rank != other.rank {
            return self.rank < other.rank;
        }
        if self.quality != other.quality {
            return self.quality > other.quality;
        }
        self.node < other.node
    }
}

/// Per-prefix DODAG membership of one node.
///
/// `my_rank` doubles as a ceiling: once a node has joined with rank r it
/// only accepts uplinks that give it rank r or better until the version
/// changes or the node is reset. A node that lost every uplink keeps its
/// rank and keeps beaconing, so its subtree can use it as an interim
/// proxy.
#[derive(Debug, Clone, PartialEq)]
pub struct DodagState {
    pub prefix: Name,
    pub cp_id: u16,
    pub version: u16,
    pub is_root: bool,
    pub parent: Option<Uplink>,
    /// Best first.
    pub alternates: Vec<Uplink>,
    pub my_rank: Option<u8>,
    pub last_pam_at: SimTime,
    /// Adoption is refused before this time after a reset.
    pub holddown_until: SimTime,
    timeout: SimTime,
}

impl DodagState {
    pub fn new(prefix: Name, cp_id: u16, version: u16, parent_timeout: SimTime) -> Self {
        DodagState {
            prefix,
            cp_id,
            version,
            is_root: false,
            parent: None,
            alternates: Vec::new(),
            my_rank: None,
            last_pam_at: SimTime::ZERO,
            holddown_until: SimTime::ZERO,
            timeout: parent_timeout,
        }
    }

    pub fn root(prefix: Name, cp_id: u16, version: u16) -> Self {
        DodagState {
            is_root: true,
            my_rank: Some(0),
            ..DodagState::new(prefix, cp_id, version, SimTime::MAX)
        }
    }

    pub fn parent_id(&self) -> Option<NodeId> {
        self.parent.as_ref().map(|p| p.node)
    }

    pub fn is_attached(&self) -> bool {
        self.is_root || self.parent.is_some()
    }

    /// PAM this node would advertise, if it has a rank.
    pub fn advertisement(&self) -> Option<Pam> {
        self.my_rank.map(|rank| Pam {
            prefix: self.prefix.clone(),
            cp_id: self.cp_id,
            rank,
            version: self.version,
        })
    }

    /// Default routes: parent at priority 0, alternates at priority 1.
    pub fn routes(&self) -> Vec<Route> {
        self.parent
            .iter()
            .map(|p| Route::new(FaceId::Link(p.node), 0, p.quality))
            .chain(
                self.alternates
                    .iter()
                    .map(|a| Route::new(FaceId::Link(a.node), 1, a.quality)),
            )
            .collect()
    }

    /// Applies a received PAM. Returns false when it was ignored.
    pub fn on_pam(&mut self, from: NodeId, pam: &Pam, quality: f64, now: SimTime) -> bool {
        if self.is_root || pam.rank >= SOLICIT_RANK - 1 || pam.version < self.version {
            return false;
        }
        if pam.version > self.version {
            self.version = pam.version;
            self.cp_id = pam.cp_id;
            self.parent = None;
            self.alternates.clear();
            self.my_rank = None;
        }
        let cand = Uplink {
            node: from,
            rank: pam.rank,
            quality,
            last_heard: now,
        };
        let cand_rank = pam.rank + 1;
        if self.parent_id() == Some(from) {
            if self.my_rank.is_some_and(|r| cand_rank > r) {
                // The parent was reset and came back deeper.
                self.lose_parent(now);
                return true;
            }
            self.parent = Some(cand);
            self.my_rank = Some(cand_rank);
            self.last_pam_at = now;
            self.prune();
            return true;
        }
        if now < self.holddown_until {
            return false;
        }
        if self.my_rank.is_some_and(|r| cand_rank > r) {
            self.alternates.retain(|a| a.node != from);
            return false;
        }
        match &self.parent {
            Some(p) if !cand.better_than(p) => {
                self.alternates.retain(|a| a.node != from);
                self.alternates.push(cand);
                self.sort_alternates();
            }
            _ => {
                self.alternates.retain(|a| a.node != from);
                if let Some(old) = self.parent.take() {
                    self.alternates.push(old);
                }
                self.parent = Some(cand);
                self.my_rank = Some(cand_rank);
                self.last_pam_at = now;
                self.prune();
            }
        }
        true
    }

    /// Drops the parent if it has been silent for the loss timeout.
    /// Returns true when the parent was lost.
    pub fn check_parent(&mut self, now: SimTime) -> bool {
        let silent = self
            .parent
            .as_ref()
            .is_some_and(|p| now.saturating_sub(p.last_heard) >= self.timeout);
        if silent {
            self.lose_parent(now);
        }
        silent
    }

    /// Promotes the best recently heard alternate, or detaches keeping the
    /// rank ceiling.
    pub fn lose_parent(&mut self, now: SimTime) {
        self.parent = None;
        let timeout = self.timeout;
        self.alternates
            .retain(|a| now.saturating_sub(a.last_heard) < timeout);
        if !self.alternates.is_empty() {
            let best = self.alternates.remove(0);
            self.my_rank = Some(best.rank + 1);
            self.parent = Some(best);
            self.last_pam_at = now;
            self.prune();
        }
    }

    /// Forgets the DODAG, including the rank ceiling.
    pub fn reset(&mut self, holddown_until: SimTime) {
        self.parent = None;
        self.alternates.clear();
        self.my_rank = None;
        self.holddown_until = holddown_until;
    }

    /// Removes every uplink through `node`.
    pub fn forget_neighbor(&mut self, node: NodeId, now: SimTime) {
        self.alternates.retain(|a| a.node != node);
        if self.parent_id() == Some(node) {
            self.lose_parent(now);
        }
    }

    fn prune(&mut self) {
        let Some(rank) = self.my_rank else { return };
        let parent = self.parent_id();
        self.alternates
            .retain(|a| a.rank < rank && Some(a.node) != parent);
        self.sort_alternates();
    }

    fn sort_alternates(&mut self) {
        self.alternates.sort_by(|a, b| {
            if a.better_than(b) {
                std::cmp::Ordering::Less
            } else if b.better_than(a) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
    }
}
