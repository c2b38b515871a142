//! Seeded discrete-event simulator for lossy wireless meshes.
//!
//! Events run in `(time, sequence)` order, so a run is a pure function of
//! its inputs and seed. Frames travel encoded through the TLV codec. Each
//! unicast is retried at the link layer up to the configured budget and
//! the sender learns the outcome through [`Protocol::on_tx_status`];
//! broadcasts get one attempt with independent loss per neighbor.

mod fault;
mod link;
mod node;
mod topology;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use fault::{FaultSchedule, Move, OffWindow};
pub use link::{loss_for_success, LinkModel};
pub use node::{Command, Ctx, Dest, Protocol};
pub use topology::{gen_chain, gen_clique, gen_ring, gen_ring_with_arms, Edge, NodeSpec, Role, Topology, RING_STACK};

use crate::ndn::{decode_packet, encode_packet, Packet};
use crate::time::SimTime;
use crate::trace::{Trace, TraceEvent, TraceKind, TraceLevel};
use crate::NodeId;
use node::Output;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub link: LinkModel,
    /// Per-packet processing delay at the receiver.
    pub proc_ms: f64,
    pub trace_level: TraceLevel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            link: LinkModel::default(),
            proc_ms: 1.0,
            trace_level: TraceLevel::Full,
        }
    }
}

#[derive(Debug)]
enum Event<T> {
    Start,
    Frame {
        from: NodeId,
        bytes: Arc<[u8]>,
    },
    Timer {
        epoch: u32,
        timer: T,
    },
    TxStatus {
        to: NodeId,
        packet: Packet,
        delivered: bool,
    },
    Command(Command),
    Power(bool),
    Detach,
    Attach(Vec<(NodeId, f64)>),
}

struct Scheduled<T> {
    at: SimTime,
    seq: u64,
    node: NodeId,
    event: Event<T>,
}

impl<T> PartialEq for Scheduled<T> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<T> Eq for Scheduled<T> {}

impl<T> PartialOrd for Scheduled<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Scheduled<T> {
    // Reversed: BinaryHeap is a max-heap, we pop the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Frame counters, for calibration tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub unicasts: u64,
    pub unicasts_delivered: u64,
    pub broadcasts: u64,
    pub attempts: u64,
}

pub struct Simulation<P: Protocol> {
    now: SimTime,
    seq: u64,
    queue: BinaryHeap<Scheduled<P::Timer>>,
    nodes: Vec<P>,
    alive: Vec<bool>,
    epoch: Vec<u32>,
    adj: Vec<BTreeMap<NodeId, f64>>,
    cfg: SimConfig,
    rng: ChaCha8Rng,
    trace: Trace,
    outbox: Vec<Output<P::Timer>>,
    stats: LinkStats,
    finished: bool,
}

impl<P: Protocol> Simulation<P> {
    /// `nodes[i]` runs on topology node `i`. Every node starts at t = 0.
    pub fn new(topology: &Topology, nodes: Vec<P>, cfg: SimConfig, seed: u64) -> Result<Self, ConfigError> {
        topology.validate()?;
        if nodes.len() != topology.len() {
            return Err(ConfigError::new(format!(
                "{} protocol instances for {} topology nodes",
                nodes.len(),
                topology.len()
            )));
        }
        if !(cfg.link.delay_ms >= 0.0 && cfg.proc_ms >= 0.0) {
            return Err(ConfigError::new("delays must be non-negative"));
        }
        let n = nodes.len();
        let mut sim = Simulation {
            now: SimTime::ZERO,
            seq: 0,
            queue: BinaryHeap::new(),
            nodes,
            alive: vec![true; n],
            epoch: vec![0; n],
            adj: topology.adjacency(),
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace: Trace::default(),
            outbox: Vec::new(),
            stats: LinkStats::default(),
            finished: false,
        };
        for id in 0..n {
            sim.push(SimTime::ZERO, id as NodeId, Event::Start);
        }
        Ok(sim)
    }

    fn push(&mut self, at: SimTime, node: NodeId, event: Event<P::Timer>) {
        self.seq += 1;
        self.queue.push(Scheduled {
            at,
            seq: self.seq,
            node,
            event,
        });
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn node(&self, id: NodeId) -> &P {
        &self.nodes[id as usize]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut P {
        &mut self.nodes[id as usize]
    }

    pub fn nodes(&self) -> &[P] {
        &self.nodes
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        self.alive[id as usize]
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    /// Current directed loss of the link `a → b`, if the link exists.
    pub fn link_loss(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.adj[a as usize].get(&b).copied()
    }

    /// Overrides the loss of the directed link `a → b`.
    pub fn set_link_loss(&mut self, a: NodeId, b: NodeId, loss: f64) {
        if let Some(l) = self.adj[a as usize].get_mut(&b) {
            *l = loss;
        }
    }

    pub fn schedule_command(&mut self, at: SimTime, node: NodeId, cmd: Command) {
        self.push(at, node, Event::Command(cmd));
    }

    /// Registers every outage and move of `schedule`.
    pub fn inject_fault(&mut self, schedule: &FaultSchedule) -> Result<(), ConfigError> {
        schedule.validate(self.nodes.len())?;
        for w in &schedule.windows {
            for &n in &w.nodes {
                self.push(SimTime::from_ms_f64(w.off_at_ms), n, Event::Power(false));
                self.push(SimTime::from_ms_f64(w.on_at_ms), n, Event::Power(true));
            }
        }
        for m in &schedule.moves {
            self.push(SimTime::from_ms_f64(m.detach_at_ms), m.node, Event::Detach);
            self.push(SimTime::from_ms_f64(m.attach_at_ms), m.node, Event::Attach(m.neighbors.clone()));
        }
        Ok(())
    }

    /// Executes every event scheduled at or before `t_end`.
    pub fn run_until(&mut self, t_end: SimTime) {
        while let Some(top) = self.queue.peek() {
            if top.at > t_end {
                break;
            }
            let Some(ev) = self.queue.pop() else { break };
            self.now = ev.at;
            self.dispatch(ev.node, ev.event);
        }
        self.now = self.now.max(t_end);
    }

    /// Runs to `t_end`, lets every node emit its end-of-run snapshot and
    /// returns the trace.
    pub fn run(mut self, t_end: SimTime) -> Trace {
        self.run_until(t_end);
        self.finish();
        self.trace
    }

    /// End-of-run snapshot; idempotent.
    pub fn finish(&mut self) {
        if self.finished {
            return;
        }
        self.finished = true;
        for id in 0..self.nodes.len() {
            self.with_ctx(id as NodeId, |node, ctx| node.finish(ctx));
        }
        self.outbox.clear();
    }

    pub fn into_trace(mut self) -> Trace {
        self.finish();
        self.trace
    }

    fn with_ctx<F>(&mut self, id: NodeId, f: F)
    where
        F: FnOnce(&mut P, &mut Ctx<'_, P::Timer>),
    {
        let mut ctx = Ctx::new(
            self.now,
            id,
            &mut self.rng,
            &mut self.outbox,
            &mut self.trace,
            self.cfg.trace_level,
        );
        f(&mut self.nodes[id as usize], &mut ctx);
    }

    fn record(&mut self, node: NodeId, kind: TraceKind, aux: Vec<(&str, Value)>) {
        self.trace.push(TraceEvent {
            t: self.now.as_ms(),
            node,
            kind,
            name: None,
            aux: aux.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        });
    }

    fn dispatch(&mut self, id: NodeId, event: Event<P::Timer>) {
        let idx = id as usize;
        match event {
            Event::Power(on) => {
                if self.alive[idx] == on {
                    return;
                }
                self.alive[idx] = on;
                if !on {
                    self.epoch[idx] += 1;
                }
                self.record(id, if on { TraceKind::NodeOn } else { TraceKind::NodeOff }, vec![]);
                self.with_ctx(id, |node, ctx| node.on_power(ctx, on));
            }
            _ if !self.alive[idx] => {}
            Event::Start => self.with_ctx(id, |node, ctx| node.start(ctx)),
            Event::Frame { from, bytes } => match decode_packet(&bytes) {
                Ok(packet) => {
                    let quality = 1.0 - self.adj[idx].get(&from).copied().unwrap_or(1.0);
                    self.with_ctx(id, |node, ctx| node.on_packet(ctx, from, quality, packet));
                }
                Err(e) => self.record(
                    id,
                    TraceKind::Drop,
                    vec![("reason", Value::from("malformed")), ("detail", Value::from(e.to_string()))],
                ),
            },
            Event::Timer { epoch, timer } => {
                if epoch == self.epoch[idx] {
                    self.with_ctx(id, |node, ctx| node.on_timer(ctx, timer));
                }
            }
            Event::TxStatus { to, packet, delivered } => {
                self.with_ctx(id, |node, ctx| node.on_tx_status(ctx, to, &packet, delivered));
            }
            Event::Command(cmd) => self.with_ctx(id, |node, ctx| node.on_command(ctx, cmd)),
            Event::Detach => {
                let neighbors: Vec<NodeId> = self.adj[idx].keys().copied().collect();
                for n in neighbors {
                    self.adj[n as usize].remove(&id);
                }
                self.adj[idx].clear();
                self.record(id, TraceKind::Detach, vec![]);
                self.with_ctx(id, |node, ctx| node.on_link_change(ctx, false));
            }
            Event::Attach(neighbors) => {
                for (n, loss) in &neighbors {
                    self.adj[idx].insert(*n, *loss);
                    self.adj[*n as usize].insert(id, *loss);
                }
                let peers: Vec<Value> = neighbors.iter().map(|(n, _)| Value::from(*n)).collect();
                self.record(id, TraceKind::Attach, vec![("neighbors", Value::from(peers))]);
                self.with_ctx(id, |node, ctx| node.on_link_change(ctx, true));
            }
        }
        self.flush(id);
    }

    fn flush(&mut self, from: NodeId) {
        let outputs = std::mem::take(&mut self.outbox);
        for out in outputs {
            match out {
                Output::Timer { at, timer } => {
                    let epoch = self.epoch[from as usize];
                    self.push(at.max(self.now), from, Event::Timer { epoch, timer });
                }
                Output::Send { dest, packet, retries } => self.transmit(from, dest, packet, retries),
            }
        }
    }

    fn transmit(&mut self, from: NodeId, dest: Dest, packet: Packet, retries: Option<u8>) {
        let bytes: Arc<[u8]> = match encode_packet(&packet) {
            Ok(b) => b.into(),
            Err(e) => {
                self.record(
                    from,
                    TraceKind::Drop,
                    vec![("reason", Value::from("encode")), ("detail", Value::from(e.to_string()))],
                );
                return;
            }
        };
        let delay = SimTime::from_ms_f64(self.cfg.link.delay_ms);
        let proc = SimTime::from_ms_f64(self.cfg.proc_ms);
        match dest {
            Dest::Broadcast => {
                self.stats.broadcasts += 1;
                let links: Vec<(NodeId, f64)> = self.adj[from as usize].iter().map(|(n, l)| (*n, *l)).collect();
                for (to, loss) in links {
                    if self.rng.gen::<f64>() >= loss {
                        self.push(
                            self.now + delay + proc,
                            to,
                            Event::Frame {
                                from,
                                bytes: bytes.clone(),
                            },
                        );
                    }
                }
            }
            Dest::Unicast(to) => {
                self.stats.unicasts += 1;
                let budget = if self.cfg.link.l2_ack {
                    retries.unwrap_or(self.cfg.link.l2_retries) as u64 + 1
                } else {
                    1
                };
                let loss = self.adj[from as usize].get(&to).copied();
                let reachable = loss.is_some() && self.alive[to as usize];
                let mut delivered_at = None;
                for attempt in 1..=budget {
                    self.stats.attempts += 1;
                    // Draw even for unreachable peers so the RNG stream does
                    // not depend on liveness.
                    let draw = self.rng.gen::<f64>();
                    if reachable && draw >= loss.unwrap_or(1.0) {
                        delivered_at = Some(attempt);
                        break;
                    }
                }
                let used = delivered_at.unwrap_or(budget);
                let status_at = self.now + SimTime(delay.0 * used);
                if delivered_at.is_some() {
                    self.stats.unicasts_delivered += 1;
                    self.push(status_at + proc, to, Event::Frame { from, bytes });
                }
                if self.cfg.link.l2_ack {
                    self.push(
                        status_at,
                        from,
                        Event::TxStatus {
                            to,
                            packet,
                            delivered: delivered_at.is_some(),
                        },
                    );
                }
            }
        }
    }
}
