//! Comparators for the planner: an exact MILP for small instances and a
//! per-user greedy baseline.

mod baseline;
mod exact;
mod paths;

pub use baseline::{solve_greedy_baseline, Comparator, GreedyBaseline, GreedyConfig, PathStrategy, Scoring};
pub use exact::{solve_exact, ExactCeiling, ExactOptions, ExactSolution};
pub use paths::candidate_paths;
