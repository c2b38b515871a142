use std::fmt::Write as _;

use super::audit::audit_trace;
use super::metrics::{mean, publish_latencies, publish_records, success_by_hop, PublishRecord};
use super::scenario::Expectations;
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Audits every trial, then applies the scenario's expectations to the
/// pooled publications.
pub fn checks(expect: &Expectations, traces: &[Trace]) -> Vec<Check> {
    let mut out = Vec::new();
    let reports: Vec<_> = traces.iter().map(audit_trace).collect();
    if let Some(first) = reports.first() {
        for (i, a) in first.iter().enumerate() {
            let violations: Vec<&String> = reports.iter().flat_map(|r| &r[i].violations).collect();
            let checked: usize = reports.iter().map(|r| r[i].checked).sum();
            out.push(Check {
                name: format!("audit {}", a.name),
                pass: violations.is_empty(),
                detail: match violations.first() {
                    None => format!("{checked} checked"),
                    Some(v) => format!("{} violations, first: {v}", violations.len()),
                },
            });
        }
    }
    let records: Vec<PublishRecord> = traces.iter().flat_map(publish_records).collect();
    if let Some(min) = expect.min_success_per_hop {
        let stats = success_by_hop(&records);
        let worst = stats
            .iter()
            .filter(|s| s.hop.is_some_and(|h| h > 0))
            .min_by(|a, b| a.rate().total_cmp(&b.rate()));
        let (pass, detail) = match worst {
            Some(w) => (w.rate() >= min, format!("worst hop {:?} at {:.4} (>= {min})", w.hop, w.rate())),
            None => (false, "no publications".to_string()),
        };
        out.push(Check {
            name: "success per hop".into(),
            pass,
            detail,
        });
    }
    let ttp = publish_latencies(&records);
    if let Some((lo, hi)) = expect.mean_publish_ms {
        let m = mean(&ttp);
        out.push(Check {
            name: "mean time to publish".into(),
            pass: m.is_some_and(|m| (lo..=hi).contains(&m)),
            detail: format!("{} ms in [{lo}, {hi}]", m.map_or("n/a".into(), |m| format!("{m:.1}"))),
        });
    }
    if let Some(max) = expect.max_publish_ms {
        let worst = ttp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(Check {
            name: "max time to publish".into(),
            pass: !ttp.is_empty() && worst <= max,
            detail: format!("{worst:.1} ms <= {max}"),
        });
    }
    out
}

pub fn render(title: &str, checks: &[Check]) -> String {
    let mut s = format!("{title}\n");
    for c in checks {
        let _ = writeln!(s, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    let _ = writeln!(s, "{} checks, {failed} failed", checks.len());
    s
}
