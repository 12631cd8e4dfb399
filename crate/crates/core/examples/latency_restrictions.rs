//! Prints shortest latencies, per-source allowed arcs and the largest path
//! latency a steered flow can reach, in both restriction modes.

use pranos::latency::{LatencyTables, RestrictionMode};
use pranos::model::io::load_network;
use pranos::model::ArcId;

fn main() -> pranos::Result<()> {
    let net = load_network(include_str!("../data/metro.json"))?;
    let name = |d: pranos::model::DcId| net.dc(d).name.as_str();
    for mode in [RestrictionMode::ShortestPath, RestrictionMode::Cabdriver] {
        let tables = LatencyTables::compute(&net, mode)?;
        println!("== {mode:?}");
        for s in net.dc_ids() {
            let arcs: Vec<String> = (0..net.num_arcs())
                .map(ArcId)
                .filter(|&a| tables.allowed(s, a))
                .map(|a| format!("{}>{}", name(net.arc(a).from), name(net.arc(a).to)))
                .collect();
            println!("from {:<10} {} arcs: {}", name(s), arcs.len(), arcs.join(" "));
            for t in net.dc_ids().filter(|&t| t != s) {
                print!("  {}: delta {} bound {:?}", name(t), tables.delta(s, t), tables.path_bound(s, t));
            }
            println!();
        }
    }
    Ok(())
}
