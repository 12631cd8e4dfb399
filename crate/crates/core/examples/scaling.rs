//! LP time stays flat as users grow; rounding time grows with them.
//! Pass a larger count as the first argument to extend the sweep.

use std::time::Instant;

use pranos::harness::{prepare, LatencyMode, Scenario, TopologySpec};
use pranos::planner::{plan, PlannerOptions};
use pranos::rounding::round_all;

fn main() -> pranos::Result<()> {
    let top: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let mut counts = vec![1_000];
    while *counts.last().unwrap() < top {
        counts.push(counts.last().unwrap() * 10);
    }
    println!("{:>9} {:>9} {:>10} {:>9}", "users", "lp s", "round s", "rejected");
    for n in counts {
        let mut s = Scenario {
            topology: TopologySpec::Preset { name: "100N150E".into() },
            latency: LatencyMode::Relaxed,
            apps: 2,
            ..Scenario::default()
        };
        s.users.count = n;
        let p = prepare(&s, 0, &mut Vec::new())?;
        let t = Instant::now();
        let flow = plan(&p.net, &p.apps, p.users.aggregate(), &p.tables, &PlannerOptions::default())?;
        let lp = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let out = round_all(&p.users, &flow, &p.net, &p.apps)?;
        let round = t.elapsed().as_secs_f64();
        println!("{n:>9} {lp:>9.3} {round:>10.4} {:>9}", out.total_rejected());
    }
    Ok(())
}
