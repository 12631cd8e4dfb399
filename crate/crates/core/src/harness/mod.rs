//! Scenario generation, experiment orchestration and CSV reporting.

mod experiment;
mod latency_mode;
mod report;
mod topology;
mod users;

pub use experiment::{
    prepare, rejection_histogram, run_experiment, run_repetition, summarize, ExactPolicy, MethodRun, Methods, Prepared,
    RunRecord, Scenario, ScenarioReport, SummaryRow, TopologySpec,
};
pub use latency_mode::{app_mix, layer_thresholds, make_latency_mode, strict_bound, LatencyMode};
pub use report::write_report;
pub use topology::{
    generate_hierarchical_topology, generate_random_topology, HierarchySpec, LayerSpec, Preset, Resources,
};
pub use users::{generate_users, ranked_edge_dcs, DemandSpec, EntryDistribution, UserSpec};

#[cfg(test)]
mod tests;
