//! Scenario runner, metrics and invariant audits.

pub mod audit;
pub mod metrics;
pub mod report;
pub mod scenario;

pub use scenario::{
    converged_parents, run, run_baseline, run_hopp, run_trials, Expectations, ProtocolKind, RankOutage, Scenario,
    ScheduledCommand, TopologySpec, Workload,
};
