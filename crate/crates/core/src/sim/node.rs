use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ndn::{Name, Packet};
use crate::time::SimTime;
use crate::trace::{Trace, TraceEvent, TraceKind, TraceLevel};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dest {
    Broadcast,
    Unicast(NodeId),
}

/// Application-layer request delivered to a node by the workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Publish {
        name: Name,
        #[serde(default)]
        payload: Vec<u8>,
        #[serde(default)]
        topics: Vec<Name>,
    },
    Subscribe {
        name: Name,
        lifetime_ms: u32,
        #[serde(default)]
        refresh: bool,
    },
    QueryTopic {
        topic: Name,
    },
}

#[derive(Debug, Clone)]
pub(crate) enum Output<T> {
    Send {
        dest: Dest,
        packet: Packet,
        retries: Option<u8>,
    },
    Timer {
        at: SimTime,
        timer: T,
    },
}

/// Per-callback handle through which a node acts on the world.
pub struct Ctx<'a, T> {
    pub now: SimTime,
    pub node: NodeId,
    rng: &'a mut ChaCha8Rng,
    out: &'a mut Vec<Output<T>>,
    trace: &'a mut Trace,
    level: TraceLevel,
}

impl<'a, T> Ctx<'a, T> {
    pub(crate) fn new(
        now: SimTime,
        node: NodeId,
        rng: &'a mut ChaCha8Rng,
        out: &'a mut Vec<Output<T>>,
        trace: &'a mut Trace,
        level: TraceLevel,
    ) -> Self {
        Ctx {
            now,
            node,
            rng,
            out,
            trace,
            level,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }

    pub fn send(&mut self, dest: Dest, packet: impl Into<Packet>) {
        self.out.push(Output::Send {
            dest,
            packet: packet.into(),
            retries: None,
        });
    }

    /// Unicast with a link-layer retry budget other than the link default.
    pub fn send_with_retries(&mut self, dest: Dest, packet: impl Into<Packet>, retries: u8) {
        self.out.push(Output::Send {
            dest,
            packet: packet.into(),
            retries: Some(retries),
        });
    }

    pub fn set_timer(&mut self, at: SimTime, timer: T) {
        self.out.push(Output::Timer { at, timer });
    }

    pub fn wants(&self, kind: TraceKind) -> bool {
        self.level.wants(kind)
    }

    pub fn trace<I>(&mut self, kind: TraceKind, name: Option<&Name>, aux: I)
    where
        I: IntoIterator<Item = (&'static str, Value)>,
    {
        if !self.level.wants(kind) {
            return;
        }
        let ev = TraceEvent {
            t: self.now.as_ms(),
            node: self.node,
            kind,
            name: name.cloned(),
            aux: aux.into_iter().map(|(k, v)| (k.to_string(), v)).collect::<BTreeMap<_, _>>(),
        };
        if self.level.keeps(&ev) {
            self.trace.push(ev);
        }
    }
}

/// A protocol instance driven by the simulator. Callbacks run in
/// timestamp order on one logical thread.
pub trait Protocol {
    type Timer: Clone + fmt::Debug;

    fn start(&mut self, ctx: &mut Ctx<'_, Self::Timer>);

    fn on_packet(&mut self, ctx: &mut Ctx<'_, Self::Timer>, from: NodeId, link_quality: f64, packet: Packet);

    fn on_timer(&mut self, ctx: &mut Ctx<'_, Self::Timer>, timer: Self::Timer);

    fn on_command(&mut self, ctx: &mut Ctx<'_, Self::Timer>, cmd: Command);

    /// Link-layer outcome of a unicast once acknowledged or abandoned.
    fn on_tx_status(&mut self, _ctx: &mut Ctx<'_, Self::Timer>, _to: NodeId, _packet: &Packet, _delivered: bool) {}

    /// Called after the simulator has cancelled pending timers (off) or
    /// revived the node (on).
    fn on_power(&mut self, _ctx: &mut Ctx<'_, Self::Timer>, _on: bool) {}

    /// Mobility: `attached` is false when the node lost all links and true
    /// once it has a new neighborhood.
    fn on_link_change(&mut self, _ctx: &mut Ctx<'_, Self::Timer>, _attached: bool) {}

    /// End of run; emit custody snapshots.
    fn finish(&mut self, _ctx: &mut Ctx<'_, Self::Timer>) {}
}
