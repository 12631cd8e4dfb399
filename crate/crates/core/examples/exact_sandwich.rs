//! On a small instance the exact optimum sits between the plan's
//! fractional cost and the rounded deployment's cost.

use pranos::latency::{LatencyTables, RestrictionMode};
use pranos::model::io::{load_applications, load_network, load_users};
use pranos::model::{add_rejection_sink, deployment_cost, DEFAULT_PENALTY};
use pranos::planner::{plan, PlannerOptions};
use pranos::reference::{solve_exact, ExactOptions};
use pranos::rounding::round_all;

const TOPOLOGY: &str = include_str!("../data/metro.json");

fn main() -> pranos::Result<()> {
    let net = load_network(TOPOLOGY)?;
    let apps = load_applications(TOPOLOGY, &net)?;
    let (net, apps) = add_rejection_sink(&net, &apps, DEFAULT_PENALTY)?;
    let users = load_users(include_str!("../data/metro_users_small.json"), &net, &apps)?;
    let tables = LatencyTables::compute(&net, RestrictionMode::ShortestPath)?;

    let flow = plan(&net, &apps, users.aggregate(), &tables, &PlannerOptions::default())?;
    let rounded = round_all(&users, &flow, &net, &apps)?;
    let exact = solve_exact(&net, &apps, users.users(), &tables, &ExactOptions::default())?;

    let psi = deployment_cost(&net, &apps, users.users(), &rounded.deployment);
    println!("fractional plan {:>12.3}", flow.cost);
    println!("exact           {:>12.3} (proven {})", exact.objective, exact.proven);
    println!("rounded plan    {:>12.3}", psi);
    println!("rejected: exact {}, rounded {}", exact.deployment.num_rejected(), rounded.deployment.num_rejected());
    Ok(())
}
