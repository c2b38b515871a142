use serde::{Deserialize, Serialize};

use super::Name;

/// Rank value a PAM carries when it is a solicitation rather than an
/// advertisement.
pub const SOLICIT_RANK: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interest {
    pub name: Name,
    pub nonce: u32,
    pub lifetime_ms: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Data {
    pub name: Name,
    pub payload: Vec<u8>,
    /// Topics this content belongs to.
    pub meta_topics: Vec<Name>,
    /// Content names carried as metadata by topic replies.
    pub meta_names: Vec<Name>,
}

impl Data {
    pub fn new(name: Name, payload: impl Into<Vec<u8>>) -> Self {
        Data {
            name,
            payload: payload.into(),
            ..Data::default()
        }
    }

    pub fn is_topic_reply(&self) -> bool {
        self.payload.is_empty() && !self.meta_names.is_empty()
    }
}

/// Prefix Advertisement Message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pam {
    pub prefix: Name,
    pub cp_id: u16,
    /// Hop distance of the sender from the content proxy.
    pub rank: u8,
    pub version: u16,
}

impl Pam {
    pub fn solicitation(prefix: Name) -> Self {
        Pam {
            prefix,
            cp_id: 0,
            rank: SOLICIT_RANK,
            version: 0,
        }
    }

    pub fn is_solicitation(&self) -> bool {
        self.rank == SOLICIT_RANK
    }
}

/// Name Advertisement Message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nam {
    /// Content being advertised.
    pub name: Name,
    /// Prefix whose DODAG the advertisement travels in.
    pub prefix: Name,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Packet {
    Interest(Interest),
    Data(Data),
    Pam(Pam),
    Nam(Nam),
}

impl Packet {
    pub fn type_octet(&self) -> u8 {
        match self {
            Packet::Interest(_) => super::codec::TYPE_INTEREST,
            Packet::Data(_) => super::codec::TYPE_DATA,
            Packet::Pam(_) => super::codec::TYPE_PAM,
            Packet::Nam(_) => super::codec::TYPE_NAM,
        }
    }

    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => &i.name,
            Packet::Data(d) => &d.name,
            Packet::Pam(p) => &p.prefix,
            Packet::Nam(n) => &n.name,
        }
    }
}

impl From<Interest> for Packet {
    fn from(i: Interest) -> Self {
        Packet::Interest(i)
    }
}

impl From<Data> for Packet {
    fn from(d: Data) -> Self {
        Packet::Data(d)
    }
}

impl From<Pam> for Packet {
    fn from(p: Pam) -> Self {
        Packet::Pam(p)
    }
}

impl From<Nam> for Packet {
    fn from(n: Nam) -> Self {
        Packet::Nam(n)
    }
}
