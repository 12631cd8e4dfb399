//! The in-repo simplex and branch-and-bound on a small knapsack in the
//! text model format.

use pranos::lp::{solve_lp, solve_mip, LinearModel, MipOptions, SolveOptions};

fn main() -> pranos::Result<()> {
    let model = LinearModel::from_text(include_str!("../data/knapsack.lp"))?;
    print!("{}", model.to_text());

    let lp = solve_lp(&model.relaxed(), &SolveOptions::default())?;
    println!("relaxation: {:?} objective {:.4} x {:?}", lp.status, lp.objective, lp.x);

    let mip = solve_mip(&model, &MipOptions::default())?;
    println!(
        "integral:   {:?} objective {:.4} x {:?} ({} nodes, proven {})",
        mip.result.status, mip.result.objective, mip.result.x, mip.nodes, mip.proven
    );
    Ok(())
}
