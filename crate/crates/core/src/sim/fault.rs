use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::NodeId;

/// A set of nodes that is dead during `[off_at_ms, on_at_ms)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffWindow {
    pub nodes: Vec<NodeId>,
    pub off_at_ms: f64,
    pub on_at_ms: f64,
}

/// A node leaves all its neighbors at `detach_at_ms` and joins
/// `neighbors` (with per-link loss) at `attach_at_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub node: NodeId,
    pub detach_at_ms: f64,
    pub attach_at_ms: f64,
    pub neighbors: Vec<(NodeId, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultSchedule {
    #[serde(default)]
    pub windows: Vec<OffWindow>,
    #[serde(default)]
    pub moves: Vec<Move>,
}

impl FaultSchedule {
    /// `count` outages of `nodes`, each `off_ms` long, starting at
    /// `first_off_ms` and repeating every `period_ms`.
    pub fn periodic(nodes: Vec<NodeId>, first_off_ms: f64, off_ms: f64, period_ms: f64, count: usize) -> Self {
        let windows = (0..count)
            .map(|k| {
                let off = first_off_ms + k as f64 * period_ms;
                OffWindow {
                    nodes: nodes.clone(),
                    off_at_ms: off,
                    on_at_ms: off + off_ms,
                }
            })
            .collect();
        FaultSchedule {
            windows,
            moves: Vec::new(),
        }
    }

    pub fn validate(&self, n_nodes: usize) -> Result<(), ConfigError> {
        let mut per_node: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_nodes];
        for w in &self.windows {
            if !(w.off_at_ms >= 0.0 && w.on_at_ms > w.off_at_ms) {
                return Err(ConfigError::new(format!(
                    "off window [{}, {}) is empty or negative",
                    w.off_at_ms, w.on_at_ms
                )));
            }
            for &n in &w.nodes {
                let slot = per_node
                    .get_mut(n as usize)
                    .ok_or_else(|| ConfigError::new(format!("fault names unknown node {n}")))?;
                slot.push((w.off_at_ms, w.on_at_ms));
            }
        }
        for (node, spans) in per_node.iter_mut().enumerate() {
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            if spans.windows(2).any(|p| p[1].0 < p[0].1) {
                return Err(ConfigError::new(format!("overlapping off windows for node {node}")));
            }
        }
        for m in &self.moves {
            if m.node as usize >= n_nodes || m.neighbors.iter().any(|(n, _)| *n as usize >= n_nodes || *n == m.node) {
                return Err(ConfigError::new(format!("move of node {} names unknown nodes", m.node)));
            }
            if !(m.detach_at_ms >= 0.0 && m.attach_at_ms >= m.detach_at_ms) {
                return Err(ConfigError::new(format!("move of node {} attaches before detaching", m.node)));
            }
            if m.neighbors.iter().any(|(_, l)| !(0.0..=1.0).contains(l)) {
                return Err(ConfigError::new(format!("move of node {} has loss outside [0,1]", m.node)));
            }
        }
        Ok(())
    }

    /// True when `node` is inside one of its off windows at `t_ms`.
    pub fn is_off(&self, node: NodeId, t_ms: f64) -> bool {
        self.windows
            .iter()
            .any(|w| w.nodes.contains(&node) && w.off_at_ms <= t_ms && t_ms < w.on_at_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_windows() {
        let f = FaultSchedule::periodic(vec![3, 4], 60_000.0, 60_000.0, 120_000.0, 2);
        assert_eq!(f.windows.len(), 2);
        assert_eq!(f.windows[1].off_at_ms, 180_000.0);
        f.validate(5).unwrap();
        assert!(f.is_off(3, 60_000.0));
        assert!(!f.is_off(3, 120_000.0));
        assert!(!f.is_off(2, 70_000.0));
    }

    #[test]
    fn rejects_overlap_and_unknown_nodes() {
        let mut f = FaultSchedule::periodic(vec![1], 0.0, 100.0, 50.0, 2);
        assert!(f.validate(2).is_err());
        f = FaultSchedule::periodic(vec![7], 0.0, 100.0, 500.0, 1);
        assert!(f.validate(2).is_err());
    }
}
