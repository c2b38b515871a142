use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::NodeId;

/// Nodes per ring position in generated ring topologies.
pub const RING_STACK: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Cp,
    Publisher,
    Subscriber,
    Consumer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    #[serde(default)]
    pub roles: Vec<Role>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    /// Per-attempt frame loss, both directions unless `loss_ba` is set.
    #[serde(default)]
    pub loss: f64,
    /// Loss from `b` to `a`, when asymmetric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_ba: Option<f64>,
}

impl Edge {
    pub fn new(a: NodeId, b: NodeId, loss: f64) -> Self {
        Edge { a, b, loss, loss_ba: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<Edge>,
}

impl Topology {
    fn with_cp(n: usize, edges: Vec<Edge>) -> Self {
        let nodes = (0..n)
            .map(|i| NodeSpec {
                id: i as NodeId,
                roles: if i == 0 { vec![Role::Cp] } else { vec![Role::Publisher] },
            })
            .collect();
        Topology { nodes, edges }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_role(&self, node: NodeId, role: Role) -> bool {
        self.nodes
            .get(node as usize)
            .is_some_and(|n| n.roles.contains(&role))
    }

    pub fn cps(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.roles.contains(&Role::Cp))
            .map(|n| n.id)
            .collect()
    }

    pub fn set_uniform_loss(&mut self, loss: f64) {
        for e in &mut self.edges {
            e.loss = loss;
            e.loss_ba = None;
        }
    }

    /// Directed per-attempt loss, `adjacency()[a][b]` for frames a → b.
    pub fn adjacency(&self) -> Vec<BTreeMap<NodeId, f64>> {
        let mut adj = vec![BTreeMap::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.a as usize].insert(e.b, e.loss);
            adj[e.b as usize].insert(e.a, e.loss_ba.unwrap_or(e.loss));
        }
        adj
    }

    pub fn neighbors(&self, node: NodeId) -> BTreeSet<NodeId> {
        self.edges
            .iter()
            .filter_map(|e| match (e.a == node, e.b == node) {
                (true, _) => Some(e.b),
                (_, true) => Some(e.a),
                _ => None,
            })
            .collect()
    }

    /// Hop distance of every node from `root`; `None` when unreachable.
    pub fn bfs_depths(&self, root: NodeId) -> Vec<Option<u32>> {
        let adj = self.adjacency();
        let mut depth = vec![None; self.nodes.len()];
        let mut queue = VecDeque::from([root]);
        depth[root as usize] = Some(0);
        while let Some(u) = queue.pop_front() {
            let d = depth[u as usize].unwrap_or(0);
            for &v in adj[u as usize].keys() {
                if depth[v as usize].is_none() {
                    depth[v as usize] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        depth
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes.is_empty() {
            return Err(ConfigError::new("topology has no nodes"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id as usize != i {
                return Err(ConfigError::new(format!("node ids must be 0..n in order; found {} at {i}", n.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if e.a == e.b || e.a as usize >= self.nodes.len() || e.b as usize >= self.nodes.len() {
                return Err(ConfigError::new(format!("bad edge {}-{}", e.a, e.b)));
            }
            if !seen.insert((e.a.min(e.b), e.a.max(e.b))) {
                return Err(ConfigError::new(format!("duplicate edge {}-{}", e.a, e.b)));
            }
            for loss in [Some(e.loss), e.loss_ba].into_iter().flatten() {
                if !(0.0..=1.0).contains(&loss) {
                    return Err(ConfigError::new(format!("edge {}-{} loss {loss} outside [0,1]", e.a, e.b)));
                }
            }
        }
        if self.cps().is_empty() {
            return Err(ConfigError::new("topology has no content proxy"));
        }
        Ok(())
    }
}

/// `n` nodes all within radio reach; node 0 is the proxy.
pub fn gen_clique(n: usize) -> Result<Topology, ConfigError> {
    if n < 2 {
        return Err(ConfigError::new("clique needs at least 2 nodes"));
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            edges.push(Edge::new(a as NodeId, b as NodeId, 0.0));
        }
    }
    Ok(Topology::with_cp(n, edges))
}

/// Straight line of `hops + 1` nodes with the proxy at one end.
pub fn gen_chain(hops: usize) -> Result<Topology, ConfigError> {
    if hops == 0 {
        return Err(ConfigError::new("chain needs at least one hop"));
    }
    let edges = (0..hops).map(|i| Edge::new(i as NodeId, i as NodeId + 1, 0.0)).collect();
    Ok(Topology::with_cp(hops + 1, edges))
}

/// Closed rectangle of `4 * k_per_side` positions with `stack` mutually
/// connected nodes per position; every node also reaches all nodes of the
/// two adjacent positions. The proxy is node 0 at position 0, so the
/// deepest position sits `2 * k_per_side` hops away.
pub fn gen_ring(k_per_side: usize, stack: usize) -> Result<Topology, ConfigError> {
    if k_per_side == 0 || stack == 0 {
        return Err(ConfigError::new("ring parameters must be positive"));
    }
    let positions = 4 * k_per_side;
    let id = |pos: usize, s: usize| ((pos % positions) * stack + s) as NodeId;
    let mut edges = Vec::new();
    for pos in 0..positions {
        for s1 in 0..stack {
            for s2 in s1 + 1..stack {
                edges.push(Edge::new(id(pos, s1), id(pos, s2), 0.0));
            }
            for s2 in 0..stack {
                edges.push(Edge::new(id(pos, s1), id(pos + 1, s2), 0.0));
            }
        }
    }
    Ok(Topology::with_cp(positions * stack, edges))
}

/// [`gen_ring`] with `RING_STACK` nodes per position plus `arms` linear
/// extensions of `arm_len` nodes. Arms hang off positions on the far side
/// of the ring, starting at the deepest one and alternating outwards.
pub fn gen_ring_with_arms(k_per_side: usize, arm_len: usize, arms: usize) -> Result<Topology, ConfigError> {
    let mut topo = gen_ring(k_per_side, RING_STACK)?;
    if arm_len == 0 || arms == 0 {
        return Err(ConfigError::new("arm parameters must be positive"));
    }
    let positions = 4 * k_per_side;
    if arms > positions * RING_STACK {
        return Err(ConfigError::new("more arms than ring nodes"));
    }
    let far = positions / 2;
    let mut order: Vec<usize> = Vec::with_capacity(positions);
    for pos in std::iter::once(far).chain((1..=far).flat_map(|o| [far + o, far - o])) {
        let pos = pos % positions;
        if !order.contains(&pos) {
            order.push(pos);
        }
    }
    let anchors: Vec<(usize, usize)> = (0..arms)
        .map(|i| (order[i % order.len()], (i / order.len()) % RING_STACK))
        .collect();
    for (pos, s) in anchors {
        let mut prev = (pos * RING_STACK + s) as NodeId;
        for _ in 0..arm_len {
            let next = topo.nodes.len() as NodeId;
            topo.nodes.push(NodeSpec {
                id: next,
                roles: vec![Role::Publisher],
            });
            topo.edges.push(Edge::new(prev, next, 0.0));
            prev = next;
        }
    }
    Ok(topo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_depth(t: &Topology) -> u32 {
        t.bfs_depths(0).into_iter().map(|d| d.unwrap()).max().unwrap()
    }

    #[test]
    fn clique_is_single_hop() {
        let t = gen_clique(12).unwrap();
        t.validate().unwrap();
        assert!(t.bfs_depths(0)[1..].iter().all(|d| *d == Some(1)));
        assert_eq!(t.edges.len(), 66);
    }

    #[test]
    fn ring_mini_depth_four() {
        let t = gen_ring(2, 3).unwrap();
        t.validate().unwrap();
        assert_eq!(t.len(), 24);
        assert_eq!(max_depth(&t), 4);
        let depths = t.bfs_depths(0);
        let count = |d| depths.iter().filter(|x| **x == Some(d)).count();
        assert_eq!((count(1), count(2), count(3), count(4)), (8, 6, 6, 3));
    }

    #[test]
    fn arms_extend_depth() {
        let t = gen_ring_with_arms(2, 6, 2).unwrap();
        t.validate().unwrap();
        assert_eq!(t.len(), 24 + 12);
        assert_eq!(max_depth(&t), 4 + 6);
        let full = gen_ring_with_arms(2, 5, 4).unwrap();
        assert_eq!(max_depth(&full), 9);
    }

    #[test]
    fn chain_depth() {
        let t = gen_chain(5).unwrap();
        assert_eq!(max_depth(&t), 5);
    }

    #[test]
    fn bad_parameters() {
        assert!(gen_clique(1).is_err());
        assert!(gen_ring(0, 2).is_err());
        assert!(gen_ring_with_arms(2, 0, 1).is_err());
        let mut t = gen_chain(2).unwrap();
        t.edges.push(Edge::new(0, 1, 0.0));
        assert!(t.validate().is_err());
        let mut t = gen_chain(2).unwrap();
        t.edges[0].loss = 1.5;
        assert!(t.validate().is_err());
    }

    #[test]
    fn json_schema() {
        let text = r#"{"nodes":[{"id":0,"roles":["cp"]},{"id":1}],"edges":[{"a":0,"b":1,"loss":0.25}]}"#;
        let t: Topology = serde_json::from_str(text).unwrap();
        t.validate().unwrap();
        assert_eq!(t.adjacency()[1][&0], 0.25);
        assert_eq!(t.cps(), [0]);
    }
}
