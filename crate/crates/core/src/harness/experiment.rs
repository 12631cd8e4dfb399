use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::latency_mode::{app_mix, make_latency_mode, LatencyMode};
use super::topology::{
    generate_hierarchical_topology, generate_random_topology, sub_seed, HierarchySpec, Preset, Resources,
};
use super::users::{generate_users, UserSpec};
use crate::error::{Error, Result};
use crate::latency::{LatencyTables, RestrictionMode};
use crate::model::{
    add_rejection_sink, deployment_cost, validate_deployment, Application, DcId, DemandSet, Deployment, Layer,
    SubstrateNetwork, DEFAULT_PENALTY,
};
use crate::planner::{fractional_rejection, plan, FlowSolution, PlanMethod, PlannerOptions};
use crate::reference::{solve_exact, solve_greedy_baseline, ExactCeiling, ExactOptions, GreedyConfig};
use crate::rounding::{round_all, RoundingOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Preset {
        name: String,
    },
    Random {
        nodes: usize,
        links: usize,
        #[serde(default = "unit")]
        latency: f64,
    },
    Hierarchical(HierarchySpec),
}

fn unit() -> f64 {
    1.0
}

impl TopologySpec {
    pub fn build(&self, seed: u64, resources: &Resources) -> Result<SubstrateNetwork> {
        match self {
            TopologySpec::Preset { name } => Preset::parse(name)?.build(seed, resources),
            TopologySpec::Random { nodes, links, latency } => {
                generate_random_topology(*nodes, *links, seed, resources, *latency)
            }
            TopologySpec::Hierarchical(spec) => generate_hierarchical_topology(spec, seed, resources),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactPolicy {
    /// Run when the instance is within the ceiling.
    #[default]
    Auto,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Methods {
    pub pranos: bool,
    pub baseline: bool,
    pub exact: ExactPolicy,
}

impl Default for Methods {
    fn default() -> Self {
        Methods { pranos: true, baseline: true, exact: ExactPolicy::Auto }
    }
}

/// One experiment: topology, users, latency mode and application mix,
/// expanded deterministically from `seed` for each repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub repetitions: usize,
    pub topology: TopologySpec,
    pub resources: Resources,
    pub users: UserSpec,
    pub latency: LatencyMode,
    /// 1 (chain) or 2 (chain and tree).
    pub apps: usize,
    pub restriction: RestrictionMode,
    pub penalty: f64,
    pub plan_method: PlanMethod,
    /// Visit users in a seeded random order instead of input order.
    pub shuffle_users: bool,
    /// Draw a new topology per repetition instead of one per scenario.
    pub resample_topology: bool,
    pub methods: Methods,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "scenario".into(),
            seed: 1,
            repetitions: 1,
            topology: TopologySpec::Preset { name: "40N60E".into() },
            resources: Resources::default(),
            users: UserSpec::default(),
            latency: LatencyMode::Relaxed,
            apps: 1,
            restriction: RestrictionMode::ShortestPath,
            penalty: DEFAULT_PENALTY,
            plan_method: PlanMethod::Auto,
            shuffle_users: false,
            resample_topology: false,
            methods: Methods::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Harness("repetitions must be at least 1".into()));
        }
        if !(1..=2).contains(&self.apps) {
            return Err(Error::Harness(format!("apps must be 1 or 2, got {}", self.apps)));
        }
        Ok(())
    }

    /// Seed of repetition `r`; the same for every method in that repetition.
    pub fn repetition_seed(&self, r: usize) -> u64 {
        sub_seed(self.seed, r as u64 + 1)
    }

    fn topology_seed(&self, r: usize) -> u64 {
        if self.resample_topology {
            sub_seed(self.repetition_seed(r), 0)
        } else {
            sub_seed(self.seed, 0)
        }
    }
}

/// A generated and preprocessed problem instance.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub net: SubstrateNetwork,
    pub apps: Vec<Application>,
    pub users: DemandSet,
    pub tables: LatencyTables,
}

/// Builds repetition `r` of `scenario`: network with sink, applications
/// with latency bounds, users and restriction tables.
pub fn prepare(scenario: &Scenario, r: usize, timings: &mut Vec<(String, f64)>) -> Result<Prepared> {
    let t = Instant::now();
    let net = scenario.topology.build(scenario.topology_seed(r), &scenario.resources)?;
    let apps = make_latency_mode(&app_mix(scenario.apps)?, scenario.latency, &net)?;
    let (net, apps) = add_rejection_sink(&net, &apps, scenario.penalty)?;
    let users = generate_users(&net, &apps, &scenario.users, scenario.repetition_seed(r))?;
    let users = if scenario.shuffle_users {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..users.len()).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(sub_seed(scenario.repetition_seed(r), 7)));
        users.reordered(&order)
    } else {
        users
    };
    timings.push(("generate".into(), t.elapsed().as_secs_f64()));
    let t = Instant::now();
    let tables = LatencyTables::compute(&net, scenario.restriction)?;
    timings.push(("prep".into(), t.elapsed().as_secs_f64()));
    Ok(Prepared { net, apps, users, tables })
}

/// Metrics of one method in one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: String,
    pub metrics: BTreeMap<String, f64>,
    /// Rejected users per entry DC (real DCs, by id).
    pub rejected_by_dc: Vec<usize>,
    /// ECU per layer, edge, transport, core.
    pub ecu_by_layer: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub repetition: usize,
    pub seed: u64,
    pub users: usize,
    /// Users entering at each real DC.
    pub offered_by_dc: Vec<usize>,
    pub methods: Vec<MethodRun>,
    pub timings: Vec<(String, f64)>,
    /// (method, error) for methods that failed in this repetition.
    pub failures: Vec<(String, String)>,
}

impl RunRecord {
    pub fn method(&self, name: &str) -> Option<&MethodRun> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn metric(&self, method: &str, metric: &str) -> Option<f64> {
        self.method(method).and_then(|m| m.metrics.get(metric).copied())
    }

    pub fn timing(&self, phase: &str) -> Option<f64> {
        self.timings.iter().find(|(p, _)| p == phase).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ScenarioReport {
    pub fn mean(&self, method: &str, metric: &str) -> Option<f64> {
        self.summary.iter().find(|r| r.method == method && r.metric == metric).map(|r| r.mean)
    }
}

fn layer_slot(layer: Layer) -> Option<usize> {
    match layer {
        Layer::Edge => Some(0),
        Layer::Transport => Some(1),
        Layer::Core => Some(2),
        Layer::Sink => None,
    }
}

fn ecu_by_layer(net: &SubstrateNetwork, per_dc: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for d in net.real_dcs() {
        if let Some(i) = layer_slot(net.dc(d).layer) {
            out[i] += per_dc[d.0];
        }
    }
    out
}

fn layer_metrics(metrics: &mut BTreeMap<String, f64>, ecu: [f64; 3]) {
    let total: f64 = ecu.iter().sum();
    for (name, v) in ["ecu_edge", "ecu_transport", "ecu_core"].iter().zip(ecu) {
        metrics.insert((*name).into(), v);
    }
    metrics.insert("ecu_total".into(), total);
    metrics.insert("ecu_core_share".into(), if total > 0.0 { ecu[2] / total } else { 0.0 });
}

fn deployment_run(method: &str, p: &Prepared, dep: &Deployment) -> Result<MethodRun> {
    let users = p.users.users();
    let report = validate_deployment(&p.net, &p.apps, users, dep)?;
    let mut metrics = BTreeMap::new();
    let mut rejected_by_dc = vec![0usize; p.net.num_dcs()];
    let mut rejected_adu = 0.0;
    for &u in &dep.rejected {
        rejected_by_dc[users[u].dc.0] += 1;
        rejected_adu += users[u].demand;
    }
    rejected_by_dc.truncate(p.net.num_real_dcs());
    metrics.insert("rejected_total".into(), dep.num_rejected() as f64);
    metrics.insert("accepted".into(), dep.num_accepted() as f64);
    metrics.insert("rejected_adu".into(), rejected_adu);
    metrics.insert("cost".into(), deployment_cost(&p.net, &p.apps, users, dep));
    metrics.insert("violations".into(), report.violations.len() as f64);
    let ecu = ecu_by_layer(&p.net, &dep.ledger.dc_ecu);
    layer_metrics(&mut metrics, ecu);
    Ok(MethodRun { method: method.into(), metrics, rejected_by_dc, ecu_by_layer: ecu })
}

fn fractional_run(p: &Prepared, flow: &FlowSolution) -> MethodRun {
    let mut per_dc = vec![0.0; p.net.num_dcs()];
    for e in &flow.placement {
        per_dc[e.dc.0] += p.apps[e.app.0].xi_node(e.function, e.dc) * e.adu;
    }
    let mut metrics = BTreeMap::new();
    metrics.insert("rejected_adu".into(), fractional_rejection(flow));
    metrics.insert("cost".into(), flow.cost);
    metrics.insert("lp_variables".into(), flow.stats.variables as f64);
    metrics.insert("lp_rows".into(), flow.stats.rows as f64);
    let ecu = ecu_by_layer(&p.net, &per_dc);
    layer_metrics(&mut metrics, ecu);
    MethodRun { method: "fractional".into(), metrics, rejected_by_dc: Vec::new(), ecu_by_layer: ecu }
}

fn pranos_run(p: &Prepared, out: &RoundingOutcome) -> Result<MethodRun> {
    let mut run = deployment_run("pranos", p, &out.deployment)?;
    let m = &mut run.metrics;
    m.insert("rejected_by_plan".into(), out.rejected_by_plan.len() as f64);
    m.insert("rejected_by_rounding".into(), out.rejected_by_rounding.len() as f64);
    m.insert("rounding_bound".into(), out.bound as f64);
    m.insert("max_arcs_per_walk".into(), out.counters.max_arcs_per_walk as f64);
    Ok(run)
}

/// Runs one repetition. Method failures are recorded, never propagated;
/// only a failure to build the instance is an error.
pub fn run_repetition(scenario: &Scenario, r: usize) -> Result<RunRecord> {
    let mut timings = Vec::new();
    let p = prepare(scenario, r, &mut timings)?;
    let users = p.users.users();
    let mut offered_by_dc = vec![0usize; p.net.num_real_dcs()];
    for u in users {
        offered_by_dc[u.dc.0] += 1;
    }
    let mut methods = Vec::new();
    let mut failures = Vec::new();

    if scenario.methods.pranos {
        let opts = PlannerOptions { method: scenario.plan_method, ..PlannerOptions::default() };
        let t = Instant::now();
        let planned = plan(&p.net, &p.apps, p.users.aggregate(), &p.tables, &opts);
        timings.push(("lp".into(), t.elapsed().as_secs_f64()));
        match planned {
            Ok(flow) => {
                methods.push(fractional_run(&p, &flow));
                let t = Instant::now();
                let rounded = round_all(&p.users, &flow, &p.net, &p.apps);
                timings.push(("rounding".into(), t.elapsed().as_secs_f64()));
                match rounded.and_then(|out| pranos_run(&p, &out)) {
                    Ok(run) => methods.push(run),
                    Err(e) => failures.push(("pranos".into(), e.to_string())),
                }
            }
            Err(e) => failures.push(("pranos".into(), e.to_string())),
        }
    }

    if scenario.methods.baseline {
        let cfg = GreedyConfig::default();
        let t = Instant::now();
        let dep = solve_greedy_baseline(&p.net, &p.apps, users, &p.tables, &cfg);
        timings.push(("baseline".into(), t.elapsed().as_secs_f64()));
        match dep.and_then(|d| deployment_run("baseline", &p, &d)) {
            Ok(run) => methods.push(run),
            Err(e) => failures.push(("baseline".into(), e.to_string())),
        }
    }

    if scenario.methods.exact == ExactPolicy::Auto && ExactCeiling::default().admits(&p.net, &p.apps, users) {
        let t = Instant::now();
        let sol = solve_exact(&p.net, &p.apps, users, &p.tables, &ExactOptions::default());
        timings.push(("exact".into(), t.elapsed().as_secs_f64()));
        match sol.and_then(|s| {
            let mut run = deployment_run("exact", &p, &s.deployment)?;
            run.metrics.insert("proven".into(), f64::from(u8::from(s.proven)));
            Ok(run)
        }) {
            Ok(run) => methods.push(run),
            Err(e) => failures.push(("exact".into(), e.to_string())),
        }
    }

    Ok(RunRecord {
        repetition: r,
        seed: scenario.repetition_seed(r),
        users: users.len(),
        offered_by_dc,
        methods,
        timings,
        failures,
    })
}

/// Runs every repetition in parallel and aggregates them in order.
pub fn run_experiment(scenario: &Scenario) -> Result<ScenarioReport> {
    scenario.check()?;
    let runs: Vec<RunRecord> =
        (0..scenario.repetitions).into_par_iter().map(|r| run_repetition(scenario, r)).collect::<Result<_>>()?;
    let summary = summarize(&runs);
    Ok(ScenarioReport { scenario: scenario.clone(), runs, summary })
}

/// Mean and sample standard deviation of every (method, metric) and of
/// every phase timing (method `timing`).
pub fn summarize(runs: &[RunRecord]) -> Vec<SummaryRow> {
    let mut values: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for run in runs {
        for m in &run.methods {
            for (k, &v) in &m.metrics {
                values.entry((m.method.clone(), k.clone())).or_default().push(v);
            }
        }
        for (phase, s) in &run.timings {
            values.entry(("timing".into(), phase.clone())).or_default().push(*s);
        }
    }
    values
        .into_iter()
        .map(|((method, metric), xs)| {
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let std =
                if n > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
            SummaryRow { method, metric, mean, std, n }
        })
        .collect()
}

/// Rejections per entry DC for one method, ordered from the most to the
/// least loaded DC (ties to the lower id): (dc, offered users, rejected).
pub fn rejection_histogram(run: &RunRecord, method: &str) -> Vec<(DcId, usize, usize)> {
    let Some(m) = run.method(method) else { return Vec::new() };
    if m.rejected_by_dc.is_empty() {
        return Vec::new();
    }
    let mut rows: Vec<(DcId, usize, usize)> =
        run.offered_by_dc.iter().enumerate().map(|(d, &o)| (DcId(d), o, m.rejected_by_dc[d])).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    rows
}
