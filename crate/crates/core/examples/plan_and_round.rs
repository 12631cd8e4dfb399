//! Solves the flow LP once, then rounds it for two user orders. The plan's
//! cost is a lower bound on both.

use pranos::latency::{LatencyTables, RestrictionMode};
use pranos::model::io::{load_applications, load_network, load_users};
use pranos::model::{add_rejection_sink, deployment_cost, DEFAULT_PENALTY};
use pranos::planner::{audit_flow, fractional_rejection, plan, PlannerOptions};
use pranos::rounding::{round_all, rounding_bound};

const TOPOLOGY: &str = include_str!("../data/metro.json");

fn main() -> pranos::Result<()> {
    let net = load_network(TOPOLOGY)?;
    let apps = load_applications(TOPOLOGY, &net)?;
    let (net, apps) = add_rejection_sink(&net, &apps, DEFAULT_PENALTY)?;
    let users = load_users(include_str!("../data/metro_users.json"), &net, &apps)?;
    let tables = LatencyTables::compute(&net, RestrictionMode::Cabdriver)?;

    let flow = plan(&net, &apps, users.aggregate(), &tables, &PlannerOptions::default())?;
    let audit = audit_flow(&net, &apps, users.aggregate(), &tables, &flow, 1e-6);
    println!(
        "plan: cost {:.2}, {:.2} ADU to the sink, {} variables, audit ok {}",
        flow.cost,
        fractional_rejection(&flow),
        flow.stats.variables,
        audit.ok()
    );
    for p in flow.placement.iter().filter(|p| p.adu > 1e-9 && !net.is_sink(p.dc)) {
        let app = &apps[p.app.0];
        println!("  {}/{} on {}: {:.2} ADU", app.name, app.function(p.function).name, net.dc(p.dc).name, p.adu);
    }

    let reversed = users.reordered(&(0..users.len()).rev().collect::<Vec<_>>());
    for (label, order) in [("input order", &users), ("reversed", &reversed)] {
        let out = round_all(order, &flow, &net, &apps)?;
        println!(
            "{label}: cost {:.2}, rejected by plan {}, by rounding {} (bound {})",
            deployment_cost(&net, &apps, order.users(), &out.deployment),
            out.rejected_by_plan.len(),
            out.rejected_by_rounding.len(),
            rounding_bound(&net, &apps)
        );
    }
    Ok(())
}
