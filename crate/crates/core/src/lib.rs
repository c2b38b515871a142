//! HoPP publish-subscribe over a minimal NDN forwarder, with a seeded
//! discrete-event simulator for lossy low-power meshes.

pub mod baseline;
pub mod engine;
pub mod forwarder;
pub mod harness;
pub mod ndn;
pub mod sim;
pub mod time;
pub mod trace;

/// Node identifier within a simulated network.
pub type NodeId = u16;
