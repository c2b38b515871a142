//! Metrics derived from a trace alone, so a replayed trace reproduces
//! them exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::ndn::Name;
use crate::trace::{Trace, TraceKind};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct PublishRecord {
    pub name: Name,
    pub node: NodeId,
    pub t_pub: f64,
    /// Publisher's hop distance when it published.
    pub rank: Option<u32>,
    pub stored_at: Option<f64>,
    /// Push-baseline arrival at the consumer.
    pub notified_at: Option<f64>,
    /// First delivery to a subscriber.
    pub subscribed_at: Option<f64>,
}

impl PublishRecord {
    pub fn arrival(&self) -> Option<f64> {
        self.stored_at.or(self.notified_at)
    }

    /// Time to publish: publication to arrival at the consumer.
    pub fn ttp(&self) -> Option<f64> {
        self.arrival().map(|t| t - self.t_pub)
    }
}

pub fn publish_records(trace: &Trace) -> Vec<PublishRecord> {
    let mut by_name: BTreeMap<Name, PublishRecord> = BTreeMap::new();
    for ev in trace.iter() {
        let Some(name) = &ev.name else { continue };
        match ev.kind {
            TraceKind::Publish => {
                by_name.entry(name.clone()).or_insert(PublishRecord {
                    name: name.clone(),
                    node: ev.node,
                    t_pub: ev.t,
                    rank: ev.aux_u64("rank").map(|r| r as u32),
                    stored_at: None,
                    notified_at: None,
                    subscribed_at: None,
                });
            }
            TraceKind::StoredAtCP => {
                if let Some(r) = by_name.get_mut(name) {
                    r.stored_at.get_or_insert(ev.t);
                }
            }
            TraceKind::Delivered => {
                if let Some(r) = by_name.get_mut(name) {
                    match ev.aux_str("op") {
                        Some("notify") => {
                            r.notified_at.get_or_insert(ev.t);
                        }
                        Some("subscribe") => {
                            r.subscribed_at.get_or_insert(ev.t);
                        }
                        _ => {}
                    }
                }
            }
            _ => {}
        }
    }
    let mut out: Vec<_> = by_name.into_values().collect();
    out.sort_by(|a, b| a.t_pub.total_cmp(&b.t_pub).then_with(|| a.name.cmp(&b.name)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopStats {
    pub hop: Option<u32>,
    pub published: usize,
    pub delivered: usize,
}

impl HopStats {
    pub fn rate(&self) -> f64 {
        if self.published == 0 {
            0.0
        } else {
            self.delivered as f64 / self.published as f64
        }
    }
}

/// Delivery ratio per publisher hop distance, ascending.
pub fn success_by_hop(records: &[PublishRecord]) -> Vec<HopStats> {
    let mut m: BTreeMap<Option<u32>, HopStats> = BTreeMap::new();
    for r in records {
        let s = m.entry(r.rank).or_insert(HopStats {
            hop: r.rank,
            published: 0,
            delivered: 0,
        });
        s.published += 1;
        if r.arrival().is_some() {
            s.delivered += 1;
        }
    }
    m.into_values().collect()
}

/// Empirical CDF at millisecond resolution: `(ms, fraction ≤ ms)`.
pub fn cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().map(|x| x.round()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    out
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Time from the first proxy beacon until each other node first has a
/// parent, sorted ascending.
pub fn convergence_times(trace: &Trace) -> Vec<f64> {
    let Some(t0) = trace
        .of_kind(TraceKind::PamTx)
        .find(|e| e.aux_bool("cp") == Some(true))
        .map(|e| e.t)
    else {
        return Vec::new();
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for ev in trace.of_kind(TraceKind::ParentSet) {
        let has_parent = ev.aux.get("parent").is_some_and(|p| !p.is_null());
        if has_parent && seen.insert(ev.node) {
            out.push(ev.t - t0);
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

pub fn publish_latencies(records: &[PublishRecord]) -> Vec<f64> {
    records.iter().filter_map(PublishRecord::ttp).collect()
}

pub fn alert_latencies(records: &[PublishRecord]) -> Vec<f64> {
    records
        .iter()
        .filter_map(|r| r.subscribed_at.map(|t| t - r.t_pub))
        .collect()
}

/// Power-off intervals seen in the trace, merged across nodes that share
/// the same window. Unterminated outages end at infinity.
pub fn outage_windows(trace: &Trace) -> Vec<(f64, f64)> {
    let mut open: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut windows = BTreeSet::new();
    for ev in trace.iter() {
        match ev.kind {
            TraceKind::NodeOff => {
                open.insert(ev.node, ev.t);
            }
            TraceKind::NodeOn => {
                if let Some(off) = open.remove(&ev.node) {
                    windows.insert((off.to_bits(), ev.t.to_bits()));
                }
            }
            _ => {}
        }
    }
    for off in open.into_values() {
        windows.insert((off.to_bits(), f64::INFINITY.to_bits()));
    }
    let mut out: Vec<(f64, f64)> = windows.into_iter().map(|(a, b)| (f64::from_bits(a), f64::from_bits(b))).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}

/// Records published while some outage was in progress.
pub fn during_outages<'a>(records: &'a [PublishRecord], windows: &[(f64, f64)]) -> Vec<&'a PublishRecord> {
    records
        .iter()
        .filter(|r| windows.iter().any(|(off, on)| r.t_pub >= *off && r.t_pub < *on))
        .collect()
}

/// Where every published item ended up.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accounting {
    pub published: usize,
    pub stored: usize,
    /// Still in some node's custody at the end of the run.
    pub buffered: usize,
    /// Not stored, not held, with an explicit drop on record.
    pub dropped: usize,
    pub lost: Vec<Name>,
}

impl Accounting {
    pub fn conserved(&self) -> bool {
        self.lost.is_empty() && self.published == self.stored + self.buffered + self.dropped
    }
}

pub fn accounting(trace: &Trace) -> Accounting {
    let records = publish_records(trace);
    let held: BTreeSet<&Name> = trace
        .of_kind(TraceKind::Buffered)
        .filter(|e| e.aux_bool("held") == Some(true))
        .filter_map(|e| e.name.as_ref())
        .collect();
    let dropped: BTreeSet<&Name> = trace.of_kind(TraceKind::Drop).filter_map(|e| e.name.as_ref()).collect();
    let mut acc = Accounting {
        published: records.len(),
        ..Accounting::default()
    };
    for r in &records {
        if r.arrival().is_some() {
            acc.stored += 1;
        } else if held.contains(&r.name) {
            acc.buffered += 1;
        } else if dropped.contains(&r.name) {
            acc.dropped += 1;
        } else {
            acc.lost.push(r.name.clone());
        }
    }
    acc
}

fn fmt_hop(h: Option<u32>) -> String {
    h.map_or_else(|| "-".to_string(), |h| h.to_string())
}

pub fn success_csv(stats: &[HopStats]) -> String {
    let mut s = String::from("hop,published,delivered,rate\n");
    for h in stats {
        let _ = writeln!(s, "{},{},{},{:.4}", fmt_hop(h.hop), h.published, h.delivered, h.rate());
    }
    s
}

pub fn cdf_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("ms,fraction\n");
    for (ms, f) in points {
        let _ = writeln!(s, "{ms:.0},{f:.4}");
    }
    s
}

pub fn summary_csv(trace: &Trace) -> String {
    let records = publish_records(trace);
    let ttp = publish_latencies(&records);
    let acc = accounting(trace);
    let max = ttp.iter().copied().fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.3}"));
    let mut s = String::from("metric,value\n");
    let _ = writeln!(s, "published,{}", acc.published);
    let _ = writeln!(s, "delivered,{}", acc.stored);
    let _ = writeln!(s, "buffered,{}", acc.buffered);
    let _ = writeln!(s, "dropped,{}", acc.dropped);
    let _ = writeln!(s, "lost,{}", acc.lost.len());
    let _ = writeln!(s, "mean_ttp_ms,{}", opt(mean(&ttp)));
    let _ = writeln!(s, "max_ttp_ms,{}", opt(max));
    s
}

/// Every metric file for one trace, as `(file name, contents)`.
pub fn metric_files(trace: &Trace) -> Vec<(&'static str, String)> {
    let records = publish_records(trace);
    let windows = outage_windows(trace);
    let partition: Vec<f64> = during_outages(&records, &windows).iter().filter_map(|r| r.ttp()).collect();
    vec![
        ("summary.csv", summary_csv(trace)),
        ("success.csv", success_csv(&success_by_hop(&records))),
        ("cdf_convergence.csv", cdf_csv(&cdf(&convergence_times(trace)))),
        ("cdf_publish.csv", cdf_csv(&cdf(&publish_latencies(&records)))),
        ("cdf_alert.csv", cdf_csv(&cdf(&alert_latencies(&records)))),
        ("cdf_partition.csv", cdf_csv(&cdf(&partition))),
    ]
}

pub fn write_metrics(trace: &Trace, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    metric_files(trace)
        .into_iter()
        .map(|(file, body)| {
            let path = dir.join(file);
            fs::write(&path, body)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_steps_merge_rounded_values() {
        let pts = cdf(&[3.2, 1.0, 2.9, 1.4]);
        assert_eq!(pts, [(1.0, 0.5), (3.0, 1.0)]);
        assert!(cdf(&[]).is_empty());
    }

    #[test]
    fn success_rate_handles_empty_buckets() {
        let s = HopStats {
            hop: Some(2),
            published: 0,
            delivered: 0,
        };
        assert_eq!(s.rate(), 0.0);
    }
}
