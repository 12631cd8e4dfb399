//! Runs the bundled hotspot scenario and writes its CSV reports to a
//! temporary directory (or the directory given as the first argument).

use pranos::harness::{run_experiment, write_report, Scenario};

fn main() -> pranos::Result<()> {
    let scenario = Scenario::from_toml(include_str!("../data/hotspot.toml"))?;
    let report = run_experiment(&scenario)?;
    for row in &report.summary {
        if ["rejected_total", "cost", "ecu_core_share"].contains(&row.metric.as_str()) {
            println!("{:<9} {:<15} {:>16.4} ± {:.4}", row.method, row.metric, row.mean, row.std);
        }
    }
    let dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("pranos-hotspot"));
    write_report(&report, &dir)?;
    println!("reports in {}", dir.display());
    Ok(())
}
