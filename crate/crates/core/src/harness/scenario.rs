use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{BaselineNode, StaticRoutes};
use crate::engine::{HoppConfig, HoppNode};
use crate::ndn::Name;
use crate::sim::{
    gen_chain, gen_clique, gen_ring, gen_ring_with_arms, Command, ConfigError, FaultSchedule, OffWindow, Protocol,
    Role, SimConfig, Simulation, Topology,
};
use crate::time::SimTime;
use crate::trace::{Trace, TraceLevel};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Clique { n: usize },
    Chain { hops: usize },
    Ring { k_per_side: usize, stack: usize },
    RingWithArms { k_per_side: usize, arm_len: usize, arms: usize },
    Explicit { topology: Topology },
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology, ConfigError> {
        match self {
            TopologySpec::Clique { n } => gen_clique(*n),
            TopologySpec::Chain { hops } => gen_chain(*hops),
            TopologySpec::Ring { k_per_side, stack } => gen_ring(*k_per_side, *stack),
            TopologySpec::RingWithArms {
                k_per_side,
                arm_len,
                arms,
            } => gen_ring_with_arms(*k_per_side, *arm_len, *arms),
            TopologySpec::Explicit { topology } => {
                topology.validate()?;
                Ok(topology.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCommand {
    pub at_ms: f64,
    pub node: NodeId,
    pub command: Command,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Workload {
    #[default]
    None,
    /// Every publisher emits a reading every `period_ms ± jitter_ms`.
    Convergecast { period_ms: f64, jitter_ms: f64 },
    /// One publication per interval from a random live publisher.
    PublishRandom {
        interval_ms: f64,
        #[serde(default)]
        count: Option<usize>,
    },
    /// Per interval, a random subscriber asks for a name that a random
    /// publisher then publishes.
    Alert { interval_ms: f64, lifetime_ms: u32 },
    Scripted { commands: Vec<ScheduledCommand> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    #[default]
    Hopp,
    Baseline,
}

/// Outage of every node at a given hop depth from the proxy, repeated
/// `count` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOutage {
    pub rank: u32,
    pub first_off_ms: f64,
    pub off_ms: f64,
    pub period_ms: f64,
    pub count: usize,
}

/// Thresholds checked by `report`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Expectations {
    pub min_success_per_hop: Option<f64>,
    pub mean_publish_ms: Option<(f64, f64)>,
    pub max_publish_ms: Option<f64>,
}

fn default_prefixes() -> Vec<Name> {
    vec![Name::from_components([b"\xcf\x81".to_vec()]).unwrap_or_default()]
}

fn default_start() -> f64 {
    2000.0
}

fn default_drain() -> f64 {
    10_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub topology: TopologySpec,
    /// Uniform per-attempt loss applied to every edge.
    #[serde(default)]
    pub loss: Option<f64>,
    /// Prefix owned by each content proxy, in proxy id order.
    #[serde(default = "default_prefixes")]
    pub prefixes: Vec<Name>,
    #[serde(default)]
    pub protocol: ProtocolKind,
    #[serde(default)]
    pub workload: Workload,
    /// First workload event.
    #[serde(default = "default_start")]
    pub start_ms: f64,
    /// Quiet time at the end of the run.
    #[serde(default = "default_drain")]
    pub drain_ms: f64,
    pub duration_ms: f64,
    #[serde(default)]
    pub faults: FaultSchedule,
    #[serde(default)]
    pub rank_outage: Option<RankOutage>,
    #[serde(default)]
    pub hopp: HoppConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub baseline_l2_retries: u8,
    #[serde(default)]
    pub expect: Expectations,
}

impl Scenario {
    pub fn new(name: &str, topology: TopologySpec, workload: Workload, duration_ms: f64) -> Self {
        Scenario {
            name: name.to_string(),
            topology,
            loss: None,
            prefixes: default_prefixes(),
            protocol: ProtocolKind::Hopp,
            workload,
            start_ms: default_start(),
            drain_ms: default_drain(),
            duration_ms,
            faults: FaultSchedule::default(),
            rank_outage: None,
            hopp: HoppConfig::default(),
            sim: SimConfig::default(),
            baseline_l2_retries: 0,
            expect: Expectations::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ConfigError::new(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.hopp.validate()?;
        if !(self.duration_ms > 0.0 && self.start_ms >= 0.0 && self.drain_ms >= 0.0) {
            return Err(ConfigError::new("duration must be positive and start/drain non-negative"));
        }
        if let Some(loss) = self.loss {
            if !(0.0..=1.0).contains(&loss) {
                return Err(ConfigError::new(format!("loss {loss} outside [0,1]")));
            }
        }
        if self.prefixes.is_empty() || self.prefixes.iter().any(Name::is_empty) {
            return Err(ConfigError::new("at least one non-empty prefix required"));
        }
        let topo = self.build_topology()?;
        if topo.cps().len() != self.prefixes.len() {
            return Err(ConfigError::new(format!(
                "{} content proxies but {} prefixes",
                topo.cps().len(),
                self.prefixes.len()
            )));
        }
        self.resolved_faults(&topo)?.validate(topo.len())?;
        match &self.workload {
            Workload::Convergecast { period_ms, jitter_ms } if !(*period_ms > 0.0 && *jitter_ms >= 0.0 && jitter_ms < period_ms) => {
                Err(ConfigError::new("convergecast needs 0 <= jitter < period"))
            }
            Workload::PublishRandom { interval_ms, .. } | Workload::Alert { interval_ms, .. } if !(*interval_ms > 0.0) => {
                Err(ConfigError::new("workload interval must be positive"))
            }
            Workload::Scripted { commands } if commands.iter().any(|c| c.node as usize >= topo.len()) => {
                Err(ConfigError::new("scripted command names an unknown node"))
            }
            _ => Ok(()),
        }
    }

    pub fn build_topology(&self) -> Result<Topology, ConfigError> {
        let mut topo = self.topology.build()?;
        if let Some(loss) = self.loss {
            topo.set_uniform_loss(loss);
        }
        Ok(topo)
    }

    /// Explicit faults plus the rank outage resolved to node ids by hop
    /// depth from the first proxy.
    pub fn resolved_faults(&self, topo: &Topology) -> Result<FaultSchedule, ConfigError> {
        let mut faults = self.faults.clone();
        if let Some(o) = &self.rank_outage {
            let cp = *topo.cps().first().ok_or_else(|| ConfigError::new("no content proxy"))?;
            let nodes: Vec<NodeId> = topo
                .bfs_depths(cp)
                .iter()
                .enumerate()
                .filter(|(_, d)| **d == Some(o.rank))
                .map(|(i, _)| i as NodeId)
                .collect();
            if nodes.is_empty() {
                return Err(ConfigError::new(format!("no nodes at rank {}", o.rank)));
            }
            let extra = FaultSchedule::periodic(nodes, o.first_off_ms, o.off_ms, o.period_ms, o.count);
            faults.windows.extend(extra.windows);
        }
        Ok(faults)
    }

    /// Outage windows after resolution, for metrics.
    pub fn off_windows(&self) -> Result<Vec<OffWindow>, ConfigError> {
        let topo = self.build_topology()?;
        Ok(self.resolved_faults(&topo)?.windows)
    }

    /// Deterministic command list for `seed`.
    pub fn commands(&self, seed: u64) -> Result<Vec<ScheduledCommand>, ConfigError> {
        let topo = self.build_topology()?;
        let faults = self.resolved_faults(&topo)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_c0_ffee);
        let end = self.duration_ms - self.drain_ms;
        let publishers = role_members(&topo, Role::Publisher);
        let subscribers = role_members(&topo, Role::Subscriber);
        let subscribers = if subscribers.is_empty() { publishers.clone() } else { subscribers };
        let movers: Vec<NodeId> = faults.moves.iter().map(|m| m.node).collect();
        let available = |pool: &[NodeId], t: f64, except: Option<NodeId>| -> Vec<NodeId> {
            pool.iter()
                .copied()
                .filter(|n| !faults.is_off(*n, t) && !movers.contains(n) && Some(*n) != except)
                .collect()
        };
        let mut out = Vec::new();
        let mut seq = 0usize;
        let content = |node: NodeId, seq: &mut usize| -> Result<(Name, Vec<Name>), ConfigError> {
            let prefix = &self.prefixes[*seq % self.prefixes.len()];
            let name = prefix
                .child(format!("n{node}"))
                .and_then(|n| n.child(format!("{}", *seq)))
                .map_err(|e| ConfigError::new(e.to_string()))?;
            let topic = prefix.child("data").map_err(|e| ConfigError::new(e.to_string()))?;
            *seq += 1;
            Ok((name, vec![topic]))
        };
        match &self.workload {
            Workload::None => {}
            Workload::Scripted { commands } => out.extend(commands.iter().cloned()),
            Workload::Convergecast { period_ms, jitter_ms } => {
                let mut events = Vec::new();
                for &node in &publishers {
                    let mut t = self.start_ms + rng.gen_range(0.0..*period_ms);
                    while t < end {
                        events.push((t, node));
                        let j = if *jitter_ms > 0.0 { rng.gen_range(-jitter_ms..*jitter_ms) } else { 0.0 };
                        t += period_ms + j;
                    }
                }
                events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for (t, node) in events {
                    if faults.is_off(node, t) {
                        continue;
                    }
                    let (name, topics) = content(node, &mut seq)?;
                    out.push(publish(t, node, name, topics));
                }
            }
            Workload::PublishRandom { interval_ms, count } => {
                let mut t = self.start_ms;
                let limit = count.unwrap_or(usize::MAX);
                while t < end && seq < limit {
                    let pool = available(&publishers, t, None);
                    if !pool.is_empty() {
                        let node = pool[rng.gen_range(0..pool.len())];
                        let (name, topics) = content(node, &mut seq)?;
                        out.push(publish(t, node, name, topics));
                    }
                    t += interval_ms;
                }
            }
            Workload::Alert {
                interval_ms,
                lifetime_ms,
            } => {
                let mut t = self.start_ms;
                while t < end {
                    let pubs = available(&publishers, t, None);
                    if !pubs.is_empty() {
                        let p = pubs[rng.gen_range(0..pubs.len())];
                        let subs = available(&subscribers, t, Some(p));
                        if !subs.is_empty() {
                            let s = subs[rng.gen_range(0..subs.len())];
                            let (name, topics) = content(p, &mut seq)?;
                            out.push(ScheduledCommand {
                                at_ms: t,
                                node: s,
                                command: Command::Subscribe {
                                    name: name.clone(),
                                    lifetime_ms: *lifetime_ms,
                                    refresh: false,
                                },
                            });
                            out.push(publish(t, p, name, topics));
                        }
                    }
                    t += interval_ms;
                }
            }
        }
        Ok(out)
    }

    /// Prefix owned by each proxy node.
    pub fn cp_prefixes(&self, topo: &Topology) -> Vec<(NodeId, Name)> {
        topo.cps().into_iter().zip(self.prefixes.iter().cloned()).collect()
    }

    fn sim_config(&self) -> SimConfig {
        self.sim.clone()
    }
}

fn publish(t: f64, node: NodeId, name: Name, topics: Vec<Name>) -> ScheduledCommand {
    let payload = format!("{t:.0}").into_bytes();
    ScheduledCommand {
        at_ms: t,
        node,
        command: Command::Publish { name, payload, topics },
    }
}

fn role_members(topo: &Topology, role: Role) -> Vec<NodeId> {
    topo.nodes
        .iter()
        .filter(|n| n.roles.contains(&role) && !n.roles.contains(&Role::Cp))
        .map(|n| n.id)
        .collect()
}

/// HoPP nodes for `topo`, with proxies owning their prefixes.
pub fn hopp_nodes(scenario: &Scenario, topo: &Topology) -> Vec<HoppNode> {
    let cps = scenario.cp_prefixes(topo);
    (0..topo.len() as NodeId)
        .map(|id| {
            let owned = cps.iter().filter(|(c, _)| *c == id).map(|(_, p)| p.clone()).collect();
            HoppNode::new(id, scenario.hopp.clone(), owned)
        })
        .collect()
}

/// Parent of every node after HoPP converges on a loss-free copy of the
/// topology. Used to install the baseline's static routes.
pub fn converged_parents(scenario: &Scenario, seed: u64) -> Result<Vec<Option<NodeId>>, ConfigError> {
    let mut topo = scenario.build_topology()?;
    topo.set_uniform_loss(0.0);
    let depth = topo.bfs_depths(topo.cps()[0]).into_iter().flatten().max().unwrap_or(0);
    let settle = SimTime::from_ms_f64((depth as f64 + 5.0) * scenario.hopp.pam_t_ms * 2.0 + 1000.0);
    let cfg = SimConfig {
        trace_level: TraceLevel::Compact,
        ..scenario.sim_config()
    };
    let mut sim = Simulation::new(&topo, hopp_nodes(scenario, &topo), cfg, seed)?;
    sim.run_until(settle);
    let prefix = &scenario.prefixes[0];
    Ok(sim
        .nodes()
        .iter()
        .map(|n| n.dodag(prefix).and_then(|d| d.parent_id()))
        .collect())
}

fn drive<P: Protocol>(scenario: &Scenario, mut sim: Simulation<P>, topo: &Topology, seed: u64) -> Result<Simulation<P>, ConfigError> {
    sim.inject_fault(&scenario.resolved_faults(topo)?)?;
    for c in scenario.commands(seed)? {
        sim.schedule_command(SimTime::from_ms_f64(c.at_ms), c.node, c.command);
    }
    sim.run_until(SimTime::from_ms_f64(scenario.duration_ms));
    sim.finish();
    Ok(sim)
}

/// Runs the scenario with HoPP and returns the final simulation.
pub fn run_hopp(scenario: &Scenario, seed: u64) -> Result<Simulation<HoppNode>, ConfigError> {
    scenario.validate()?;
    let topo = scenario.build_topology()?;
    let sim = Simulation::new(&topo, hopp_nodes(scenario, &topo), scenario.sim_config(), seed)?;
    drive(scenario, sim, &topo, seed)
}

/// Runs the scenario with the push baseline over converged static routes.
pub fn run_baseline(scenario: &Scenario, seed: u64) -> Result<Simulation<BaselineNode>, ConfigError> {
    scenario.validate()?;
    let topo = scenario.build_topology()?;
    let parents = converged_parents(scenario, seed)?;
    let routes = StaticRoutes::from_parents(topo.cps()[0], parents)?;
    let nodes = (0..topo.len() as NodeId)
        .map(|id| BaselineNode::new(id, &routes, scenario.baseline_l2_retries))
        .collect();
    let sim = Simulation::new(&topo, nodes, scenario.sim_config(), seed)?;
    drive(scenario, sim, &topo, seed)
}

/// Runs the scenario's protocol and returns its trace.
pub fn run(scenario: &Scenario, seed: u64) -> Result<Trace, ConfigError> {
    match scenario.protocol {
        ProtocolKind::Hopp => Ok(run_hopp(scenario, seed)?.into_trace()),
        ProtocolKind::Baseline => Ok(run_baseline(scenario, seed)?.into_trace()),
    }
}

/// Runs one trial per seed on separate threads. Results are in seed order.
pub fn run_trials(scenario: &Scenario, seeds: &[u64]) -> Result<Vec<Trace>, ConfigError> {
    std::thread::scope(|s| {
        let handles: Vec<_> = seeds.iter().map(|&seed| s.spawn(move || run(scenario, seed))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(ConfigError::new("trial panicked"))))
            .collect()
    })
}
