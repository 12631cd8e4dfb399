//! Service function chain deployment on edge-to-cloud networks.
//!
//! The planner solves an aggregated flow LP and rounds it into per-user
//! unsplittable embeddings. An exact MILP and a greedy heuristic are provided
//! as comparators, and [`harness`] runs seeded experiments over them.

pub mod error;
pub mod harness;
pub mod latency;
pub mod lp;
pub mod model;
pub mod planner;
pub mod reference;
pub mod rounding;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
