//! Structured protocol trace. Every metric is computed from these events.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ndn::Name;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TraceKind {
    PamTx,
    PamRx,
    ParentSet,
    NamTx,
    NamRx,
    IntTx,
    IntRx,
    DataTx,
    DataRx,
    Publish,
    StoredAtCP,
    Delivered,
    Drop,
    Backpressure,
    CsEvict,
    CsFull,
    NodeOff,
    NodeOn,
    /// PAM solicitation broadcast.
    Solicit,
    /// NAM cache entry entered exponential back-off.
    Backoff,
    /// NAM cache entry released after a successful upstream pull.
    NcFree,
    /// Node lost all links (mobility).
    Detach,
    /// Node joined a new neighborhood (mobility).
    Attach,
    /// End-of-run custody snapshot: content still held in a NAM cache.
    Buffered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Simulation time in milliseconds.
    pub t: f64,
    pub node: NodeId,
    pub kind: TraceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<Name>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aux: BTreeMap<String, Value>,
}

impl TraceEvent {
    pub fn aux_u64(&self, key: &str) -> Option<u64> {
        self.aux.get(key).and_then(Value::as_u64)
    }

    pub fn aux_f64(&self, key: &str) -> Option<f64> {
        self.aux.get(key).and_then(Value::as_f64)
    }

    pub fn aux_bool(&self, key: &str) -> Option<bool> {
        self.aux.get(key).and_then(Value::as_bool)
    }

    pub fn aux_str(&self, key: &str) -> Option<&str> {
        self.aux.get(key).and_then(Value::as_str)
    }

    /// Link-layer peer of a Tx/Rx event.
    pub fn peer(&self) -> Option<NodeId> {
        self.aux_u64("peer").map(|p| p as NodeId)
    }
}

/// Which events a run records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    #[default]
    Full,
    /// Drops PAM receptions and PAM transmissions of non-proxy nodes,
    /// which dominate long runs.
    Compact,
}

impl TraceLevel {
    pub fn wants(self, kind: TraceKind) -> bool {
        !(self == TraceLevel::Compact && kind == TraceKind::PamRx)
    }

    pub fn keeps(self, ev: &TraceEvent) -> bool {
        match (self, ev.kind) {
            (TraceLevel::Full, _) => true,
            (TraceLevel::Compact, TraceKind::PamRx) => false,
            (TraceLevel::Compact, TraceKind::PamTx) => ev.aux_bool("cp") == Some(true),
            _ => true,
        }
    }
}

/// Append-only event log with non-decreasing timestamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, ev: TraceEvent) {
        debug_assert!(self.events.last().is_none_or(|last| last.t <= ev.t));
        self.events.push(ev);
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }

    pub fn of_kind(&self, kind: TraceKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for ev in &self.events {
            serde_json::to_writer(&mut w, ev)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_jsonl(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> io::Result<Trace> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line).map_err(io::Error::other)?);
        }
        Ok(Trace { events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut t = Trace::default();
        let mut aux = BTreeMap::new();
        aux.insert("peer".to_string(), Value::from(3));
        t.push(TraceEvent {
            t: 143.217,
            node: 4,
            kind: TraceKind::NamTx,
            name: Some("/ρ/s4/t0".parse().unwrap()),
            aux,
        });
        t.push(TraceEvent {
            t: 150.0,
            node: 0,
            kind: TraceKind::NodeOff,
            name: None,
            aux: BTreeMap::new(),
        });
        let bytes = t.to_jsonl();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with(r#"{"t":143.217,"node":4,"kind":"NamTx","name":"/ρ/s4/t0","aux":{"peer":3}}"#));
        let back = Trace::read_jsonl(bytes.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.events[0].peer(), Some(3));
    }
}
