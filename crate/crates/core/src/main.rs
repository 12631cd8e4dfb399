use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::Serialize;

use pranos::harness::{run_experiment, write_report, Scenario};
use pranos::latency::{LatencyTables, RestrictionMode};
use pranos::lp::{solve_lp, solve_mip, LinearModel, MipOptions, SolveOptions};
use pranos::model::io::{load_applications, load_network, load_users, write_deployment_csv};
use pranos::model::{
    add_rejection_sink, deployment_cost, validate_deployment, Application, DemandSet, Deployment, SubstrateNetwork,
    DEFAULT_PENALTY,
};
use pranos::planner::{audit_flow, fractional_rejection, plan, FlowSolution, PlanMethod, PlannerOptions};
use pranos::reference::{solve_exact, solve_greedy_baseline, ExactOptions, GreedyConfig};
use pranos::rounding::round_all;
use pranos::{Error, Result};

#[derive(Parser)]
#[command(name = "pranos", version, about = "Plan, round and compare SFC deployments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute latency restriction tables for a topology.
    Prep {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, value_enum, default_value = "sp")]
        restriction_mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the flow LP and write the fractional plan as JSON.
    Plan {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "auto")]
        method: PlanMethod,
        #[arg(long)]
        out: PathBuf,
        /// Also dump every positive flow variable as CSV.
        #[arg(long)]
        flows_csv: Option<PathBuf>,
    },
    /// Round a plan into per-user embeddings.
    Round {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        plan: PathBuf,
        /// Shuffle the user order with this seed; input order otherwise.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve small instances exactly.
    Exact {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the greedy baseline.
    Baseline {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario file and write CSV reports.
    Experiment {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the scenario's repetition count.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Linear programming utilities.
    Lp {
        #[command(subcommand)]
        command: LpCommand,
    },
}

#[derive(Subcommand)]
enum LpCommand {
    /// Solve a model in the line-based text format.
    Solve {
        model: PathBuf,
        /// Honour integer markers with branch and bound.
        #[arg(long)]
        mip: bool,
    },
}

#[derive(Args)]
struct Input {
    /// JSON document with `dcs`, `links` and `applications`.
    #[arg(long)]
    topology: PathBuf,
    /// JSON document with `users`.
    #[arg(long)]
    users: PathBuf,
    #[arg(long, value_enum, default_value = "sp")]
    restriction_mode: Mode,
    #[arg(long, default_value_t = DEFAULT_PENALTY)]
    penalty: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sp,
    Cab,
}

impl From<Mode> for RestrictionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Sp => RestrictionMode::ShortestPath,
            Mode::Cab => RestrictionMode::Cabdriver,
        }
    }
}

struct Loaded {
    net: SubstrateNetwork,
    apps: Vec<Application>,
    users: DemandSet,
    tables: LatencyTables,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn load(input: &Input) -> Result<Loaded> {
    let text = read(&input.topology)?;
    let net = load_network(&text)?;
    let apps = load_applications(&text, &net)?;
    let (net, apps) = add_rejection_sink(&net, &apps, input.penalty)?;
    let users = load_users(&read(&input.users)?, &net, &apps)?;
    let tables = LatencyTables::compute(&net, input.restriction_mode.into())?;
    Ok(Loaded { net, apps, users, tables })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

fn report(l: &Loaded, dep: &Deployment, out: &Path) -> Result<()> {
    let users = l.users.users();
    let feas = validate_deployment(&l.net, &l.apps, users, dep)?;
    write_deployment_csv(out, &l.net, &l.apps, users, dep)?;
    println!(
        "accepted {} rejected {} cost {:.6} violations {}",
        dep.num_accepted(),
        dep.num_rejected(),
        deployment_cost(&l.net, &l.apps, users, dep),
        feas.violations.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct TablesDoc {
    mode: RestrictionMode,
    dcs: Vec<String>,
    /// Shortest-path latency between every pair of DCs.
    delta: Vec<Vec<Option<f64>>>,
    /// Largest admissible path latency, `null` when unreachable.
    path_bound: Vec<Vec<Option<f64>>>,
    /// Per source: the admissible arcs as `from->to`.
    allowed: Vec<Vec<String>>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prep { topology, restriction_mode, out } => {
            let net = load_network(&read(&topology)?)?;
            let tables = LatencyTables::compute(&net, restriction_mode.into())?;
            let ids: Vec<_> = net.dc_ids().collect();
            let finite = |x: f64| x.is_finite().then_some(x);
            let doc = TablesDoc {
                mode: tables.mode(),
                dcs: ids.iter().map(|&d| net.dc(d).name.clone()).collect(),
                delta: ids.iter().map(|&s| ids.iter().map(|&t| finite(tables.delta(s, t))).collect()).collect(),
                path_bound: ids.iter().map(|&s| ids.iter().map(|&t| tables.path_bound(s, t)).collect()).collect(),
                allowed: ids
                    .iter()
                    .map(|&s| {
                        (0..net.num_arcs())
                            .map(pranos::model::ArcId)
                            .filter(|&a| tables.allowed(s, a))
                            .map(|a| format!("{}->{}", net.dc(net.arc(a).from).name, net.dc(net.arc(a).to).name))
                            .collect()
                    })
                    .collect(),
            };
            write_json(&out, &doc)?;
            println!("{} DCs, mode {:?}", net.num_dcs(), tables.mode());
        }
        Command::Plan { input, method, out, flows_csv } => {
            let l = load(&input)?;
            let opts = PlannerOptions { method, ..PlannerOptions::default() };
            let flow = plan(&l.net, &l.apps, l.users.aggregate(), &l.tables, &opts)?;
            let audit = audit_flow(&l.net, &l.apps, l.users.aggregate(), &l.tables, &flow, 1e-6);
            if !audit.ok() {
                return Err(Error::Internal(format!("plan failed its audit: {:?}", audit.violations)));
            }
            write_json(&out, &flow)?;
            if let Some(path) = flows_csv {
                let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
                w.write_record(["app", "link", "source", "arc", "kind", "adu"])
                    .map_err(|e| Error::Parse(e.to_string()))?;
                for f in &flow.flows {
                    let arc = match f.key.slot {
                        pranos::planner::ArcSlot::Intra => "intra".to_string(),
                        pranos::planner::ArcSlot::Arc(a) => {
                            format!("{}->{}", l.net.dc(l.net.arc(a).from).name, l.net.dc(l.net.arc(a).to).name)
                        }
                    };
                    let kind = match f.key.kind {
                        pranos::planner::FlowKind::Direct => "direct",
                        pranos::planner::FlowKind::Transient => "transient",
                    };
                    w.write_record([
                        l.apps[f.key.app.0].name.clone(),
                        f.key.link.0.to_string(),
                        l.net.dc(f.key.source).name.clone(),
                        arc,
                        kind.to_string(),
                        f.adu.to_string(),
                    ])
                    .map_err(|e| Error::Parse(e.to_string()))?;
                }
                w.flush()?;
            }
            println!(
                "cost {:.6} rejected {:.6} ADU, {} variables, {} rows, {} ({:.3}s)",
                flow.cost,
                fractional_rejection(&flow),
                flow.stats.variables,
                flow.stats.rows,
                flow.stats.method,
                flow.stats.seconds
            );
        }
        Command::Round { input, plan, seed, out } => {
            let l = load(&input)?;
            let flow: FlowSolution =
                serde_json::from_str(&read(&plan)?).map_err(|e| Error::Parse(format!("{}: {e}", plan.display())))?;
            let mut l = l;
            if let Some(seed) = seed {
                let mut order: Vec<usize> = (0..l.users.len()).collect();
                order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                l.users = l.users.reordered(&order);
            }
            let outcome = round_all(&l.users, &flow, &l.net, &l.apps)?;
            println!(
                "rejected by plan {} by rounding {} (bound {})",
                outcome.rejected_by_plan.len(),
                outcome.rejected_by_rounding.len(),
                outcome.bound
            );
            report(&l, &outcome.deployment, &out)?;
        }
        Command::Exact { input, out } => {
            let l = load(&input)?;
            let sol = solve_exact(&l.net, &l.apps, l.users.users(), &l.tables, &ExactOptions::default())?;
            println!("objective {:.6} proven {}", sol.objective, sol.proven);
            report(&l, &sol.deployment, &out)?;
        }
        Command::Baseline { input, seed, out } => {
            let l = load(&input)?;
            let cfg = GreedyConfig { order_seed: seed, ..GreedyConfig::default() };
            let dep = solve_greedy_baseline(&l.net, &l.apps, l.users.users(), &l.tables, &cfg)?;
            report(&l, &dep, &out)?;
        }
        Command::Experiment { scenario, out_dir, repetitions } => {
            let mut s = Scenario::from_toml(&read(&scenario)?)?;
            if let Some(r) = repetitions {
                s.repetitions = r;
                s.check()?;
            }
            let rep = run_experiment(&s)?;
            write_report(&rep, &out_dir)?;
            for row in rep.summary.iter().filter(|r| r.metric == "rejected_total" || r.metric == "cost") {
                println!("{:<10} {:<16} mean {:>14.4} std {:>12.4}", row.method, row.metric, row.mean, row.std);
            }
            for run in &rep.runs {
                for (m, e) in &run.failures {
                    eprintln!("repetition {}: {m} failed: {e}", run.repetition);
                }
            }
        }
        Command::Lp { command: LpCommand::Solve { model, mip } } => {
            let m = LinearModel::from_text(&read(&model)?)?;
            let res = if mip {
                let r = solve_mip(&m, &MipOptions::default())?;
                println!("nodes {} proven {}", r.nodes, r.proven);
                r.result
            } else {
                solve_lp(&m.relaxed(), &SolveOptions::default())?
            };
            println!("status {:?} objective {} iterations {}", res.status, res.objective, res.iterations);
            for (v, x) in m.vars().iter().zip(&res.x) {
                println!("{} = {}", v.name, x);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
