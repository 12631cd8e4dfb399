//! Users crowd one edge DC. The greedy baseline, embedding one user at a
//! time, runs out of nearby room sooner than the planner.

use pranos::latency::{LatencyTables, RestrictionMode};
use pranos::model::{
    add_rejection_sink, AppId, Application, Dc, DcId, DemandSet, Layer, Link, SubstrateNetwork, User, DEFAULT_PENALTY,
};
use pranos::planner::{plan, PlannerOptions};
use pranos::reference::{solve_greedy_baseline, GreedyConfig};
use pranos::rounding::round_all;

fn dc(name: &str, capacity: f64, cost: f64) -> Dc {
    Dc { name: name.into(), capacity, cost, layer: Layer::Edge, geo: None }
}

fn link(a: usize, b: usize, capacity: f64, cost: f64, latency: f64) -> Link {
    Link { a: DcId(a), b: DcId(b), capacity, cost, latency }
}

fn main() -> pranos::Result<()> {
    let inf = f64::INFINITY;
    let net = SubstrateNetwork::new(
        vec![
            dc("hot", 1.0, 1.0),
            dc("near", 2.0, 1.0),
            dc("mid", 2.0, 5.0),
            dc("far-1", 2.0, 5.0),
            dc("far-2", 2.0, 5.0),
        ],
        vec![
            link(0, 1, 10.0, 1.0, 1.0),
            link(0, 2, 10.0, 1.0, 10.0),
            link(2, 3, 10.0, 1.0, 1.0),
            link(3, 4, 10.0, 1.0, 1.0),
        ],
    )?;
    // A relaxed chain and one that must stay within latency 1 of its user.
    let relaxed = Application::chain("relaxed", &["f"], inf)?;
    let strict = Application::chain("strict", &["f"], 1.0)?;
    let (net, apps) = add_rejection_sink(&net, &[relaxed, strict], DEFAULT_PENALTY)?;
    let users: Vec<User> = [(0, 0), (0, 0), (1, 0), (1, 0)]
        .iter()
        .enumerate()
        .map(|(i, &(app, at))| User { id: i as u64, app: AppId(app), dc: DcId(at), demand: 1.0 })
        .collect();
    let users = DemandSet::new(users, &net, &apps)?;
    let tables = LatencyTables::compute(&net, RestrictionMode::ShortestPath)?;

    let greedy = solve_greedy_baseline(&net, &apps, users.users(), &tables, &GreedyConfig::default())?;
    let flow = plan(&net, &apps, users.aggregate(), &tables, &PlannerOptions::default())?;
    let rounded = round_all(&users, &flow, &net, &apps)?;

    println!("baseline rejects {:?}", greedy.rejected);
    println!("planner rejects  {:?}", rounded.deployment.rejected);
    Ok(())
}
