//! Invariant checks over a finished trace.

use std::collections::{BTreeMap, BTreeSet};

use super::metrics::accounting;
use super::scenario::{run, Scenario};
use crate::ndn::Name;
use crate::sim::ConfigError;
use crate::trace::{Trace, TraceKind};
use crate::NodeId;

/// Violations are capped so a broken run still yields a readable report.
const MAX_REPORTED: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub name: &'static str,
    pub checked: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    fn new(name: &'static str) -> Self {
        AuditReport {
            name,
            checked: 0,
            violations: Vec::new(),
        }
    }

    fn fail(&mut self, msg: String) {
        if self.violations.len() < MAX_REPORTED {
            self.violations.push(msg);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every Data transmission answers an Interest the receiver sent to the
/// transmitter and that was still alive.
pub fn no_push(trace: &Trace) -> AuditReport {
    let mut r = AuditReport::new("no_push");
    let mut asked: BTreeMap<(NodeId, NodeId, &Name), Vec<(f64, f64)>> = BTreeMap::new();
    for ev in trace.iter() {
        let (Some(name), Some(peer)) = (&ev.name, ev.peer()) else { continue };
        match ev.kind {
            TraceKind::IntTx => {
                let life = ev.aux_f64("lifetime_ms").unwrap_or(f64::INFINITY);
                asked.entry((ev.node, peer, name)).or_default().push((ev.t, life));
            }
            TraceKind::DataTx => {
                r.checked += 1;
                let ok = asked
                    .get(&(peer, ev.node, name))
                    .is_some_and(|v| v.iter().any(|(t, life)| *t <= ev.t && t + life >= ev.t));
                if !ok {
                    r.fail(format!("t={} node {} sent {} to {} unrequested", ev.t, ev.node, name, peer));
                }
            }
            _ => {}
        }
    }
    r
}

/// A node never sends a neighbor more Data for a name than it received
/// Interests for that name from the neighbor: each Data consumes a PIT
/// record.
pub fn pit_consumption(trace: &Trace) -> AuditReport {
    let mut r = AuditReport::new("pit_consumption");
    let mut credit: BTreeMap<(NodeId, NodeId, &Name), i64> = BTreeMap::new();
    for ev in trace.iter() {
        let (Some(name), Some(peer)) = (&ev.name, ev.peer()) else { continue };
        match ev.kind {
            TraceKind::IntRx => *credit.entry((ev.node, peer, name)).or_default() += 1,
            TraceKind::DataTx => {
                r.checked += 1;
                let c = credit.entry((ev.node, peer, name)).or_default();
                *c -= 1;
                if *c < 0 {
                    r.fail(format!("t={} node {} re-sent {} to {}", ev.t, ev.node, name, peer));
                }
            }
            _ => {}
        }
    }
    r
}

/// No content is evicted from a node's store while that node has custody.
pub fn protected_cs(trace: &Trace) -> AuditReport {
    let mut r = AuditReport::new("protected_cs");
    let mut custody: BTreeSet<(NodeId, &Name)> = BTreeSet::new();
    for ev in trace.iter() {
        let Some(name) = &ev.name else { continue };
        match ev.kind {
            TraceKind::Publish => {
                custody.insert((ev.node, name));
            }
            TraceKind::DataRx if ev.aux_bool("custody") == Some(true) => {
                custody.insert((ev.node, name));
            }
            TraceKind::NcFree => {
                custody.remove(&(ev.node, name));
            }
            TraceKind::CsEvict => {
                r.checked += 1;
                if custody.contains(&(ev.node, name)) {
                    r.fail(format!("t={} node {} evicted protected {}", ev.t, ev.node, name));
                }
            }
            _ => {}
        }
    }
    r
}

/// FIB size never exceeds the number of advertised prefixes.
pub fn fib_minimality(trace: &Trace) -> AuditReport {
    let mut r = AuditReport::new("fib_minimality");
    let prefixes: BTreeSet<&Name> = trace
        .iter()
        .filter(|e| matches!(e.kind, TraceKind::ParentSet) || (e.kind == TraceKind::PamTx && e.aux_bool("cp") == Some(true)))
        .filter_map(|e| e.name.as_ref())
        .collect();
    for ev in trace.of_kind(TraceKind::ParentSet) {
        r.checked += 1;
        let len = ev.aux_u64("fib_len").unwrap_or(0) as usize;
        if len > prefixes.len() {
            r.fail(format!("t={} node {} fib has {} entries for {} prefixes", ev.t, ev.node, len, prefixes.len()));
        }
    }
    r
}

#[derive(Debug, Clone, Copy)]
struct Vertex {
    parent: Option<NodeId>,
    rank: Option<u64>,
    version: Option<u64>,
}

/// Parent pointers form a forest at every instant, and within one DODAG
/// version a child's rank exceeds its parent's.
pub fn loop_freedom(trace: &Trace) -> AuditReport {
    let mut r = AuditReport::new("loop_freedom");
    let mut graphs: BTreeMap<&Name, BTreeMap<NodeId, Vertex>> = BTreeMap::new();
    for ev in trace.iter() {
        let Some(prefix) = &ev.name else { continue };
        let vertex = match ev.kind {
            TraceKind::PamTx if ev.aux_bool("cp") == Some(true) => Vertex {
                parent: None,
                rank: ev.aux_u64("rank"),
                version: ev.aux_u64("version"),
            },
            TraceKind::ParentSet => Vertex {
                parent: ev.aux_u64("parent").map(|p| p as NodeId),
                rank: ev.aux_u64("rank"),
                version: ev.aux_u64("version"),
            },
            _ => continue,
        };
        let g = graphs.entry(prefix).or_default();
        g.insert(ev.node, vertex);
        if ev.kind != TraceKind::ParentSet {
            continue;
        }
        r.checked += 1;
        let mut seen = BTreeSet::from([ev.node]);
        let mut at = ev.node;
        while let Some(p) = g.get(&at).and_then(|v| v.parent) {
            let child = g[&at];
            if let Some(pv) = g.get(&p) {
                if let (Some(cr), Some(pr)) = (child.rank, pv.rank) {
                    if child.version == pv.version && cr <= pr {
                        r.fail(format!("t={} {}: node {} rank {} under node {} rank {}", ev.t, prefix, at, cr, p, pr));
                    }
                }
            }
            if !seen.insert(p) {
                r.fail(format!("t={} {}: parent loop through node {}", ev.t, prefix, p));
                break;
            }
            at = p;
        }
    }
    r
}

/// Every published item is stored, still held, or explicitly dropped.
pub fn nc_conservation(trace: &Trace) -> AuditReport {
    let mut r = AuditReport::new("nc_conservation");
    let acc = accounting(trace);
    r.checked = acc.published;
    for name in &acc.lost {
        r.fail(format!("{name} vanished"));
    }
    if acc.lost.is_empty() && !acc.conserved() {
        r.fail(format!("{acc:?}"));
    }
    r
}

/// Powered-off nodes transmit nothing.
pub fn dead_nodes_silent(trace: &Trace) -> AuditReport {
    let mut r = AuditReport::new("dead_nodes_silent");
    let mut off = BTreeSet::new();
    for ev in trace.iter() {
        match ev.kind {
            TraceKind::NodeOff => {
                off.insert(ev.node);
            }
            TraceKind::NodeOn => {
                off.remove(&ev.node);
            }
            TraceKind::PamTx | TraceKind::NamTx | TraceKind::IntTx | TraceKind::DataTx | TraceKind::Solicit => {
                r.checked += 1;
                if off.contains(&ev.node) {
                    r.fail(format!("t={} node {} sent {:?} while off", ev.t, ev.node, ev.kind));
                }
            }
            _ => {}
        }
    }
    r
}

/// All trace-level audits.
pub fn audit_trace(trace: &Trace) -> Vec<AuditReport> {
    vec![
        no_push(trace),
        pit_consumption(trace),
        protected_cs(trace),
        fib_minimality(trace),
        loop_freedom(trace),
        nc_conservation(trace),
        dead_nodes_silent(trace),
    ]
}

/// Runs the scenario twice with one seed and compares the traces byte for
/// byte.
pub fn determinism(scenario: &Scenario, seed: u64) -> Result<AuditReport, ConfigError> {
    let mut r = AuditReport::new("determinism");
    let a = run(scenario, seed)?.to_jsonl();
    let b = run(scenario, seed)?.to_jsonl();
    r.checked = 1;
    if a != b {
        let line = a
            .split(|c| *c == b'\n')
            .zip(b.split(|c| *c == b'\n'))
            .position(|(x, y)| x != y)
            .unwrap_or(0);
        r.fail(format!("traces diverge at line {}", line + 1));
    }
    Ok(r)
}
