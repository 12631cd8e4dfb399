//! Loads the sample metro topology, embeds every user with the planner and
//! checks the result against the integral constraints.

use pranos::latency::{LatencyTables, RestrictionMode};
use pranos::model::io::{load_applications, load_network, load_users};
use pranos::model::{add_rejection_sink, deployment_cost, validate_deployment, DEFAULT_PENALTY};
use pranos::planner::{plan, PlannerOptions};
use pranos::rounding::round_all;

const TOPOLOGY: &str = include_str!("../data/metro.json");
const USERS: &str = include_str!("../data/metro_users.json");

fn main() -> pranos::Result<()> {
    let net = load_network(TOPOLOGY)?;
    let apps = load_applications(TOPOLOGY, &net)?;
    println!("{} DCs, {} links, {} applications", net.num_dcs(), net.links().len(), apps.len());

    let (net, apps) = add_rejection_sink(&net, &apps, DEFAULT_PENALTY)?;
    let users = load_users(USERS, &net, &apps)?;
    let tables = LatencyTables::compute(&net, RestrictionMode::ShortestPath)?;

    let flow = plan(&net, &apps, users.aggregate(), &tables, &PlannerOptions::default())?;
    let out = round_all(&users, &flow, &net, &apps)?;
    let report = validate_deployment(&net, &apps, users.users(), &out.deployment)?;

    println!("{} users, {} accepted", users.len(), out.deployment.num_accepted());
    println!(
        "cost {:.2}, feasible {}",
        deployment_cost(&net, &apps, users.users(), &out.deployment),
        report.feasible()
    );
    for v in &report.violations {
        println!("  {v:?}");
    }
    Ok(())
}
