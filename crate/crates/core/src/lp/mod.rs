//! Linear and mixed-integer programming.
//!
//! [`LinearModel`] is the carrier; [`ReferenceSimplex`] is the in-repo
//! backend behind the [`LpBackend`] trait.

mod mip;
mod model;
mod simplex;

pub use mip::{solve_mip, MipOptions, MipResult};
pub use model::{ConId, Constraint, LinearModel, Relation, VarId, Variable};
pub use simplex::{Basis, Simplex, SolveOptions, SolveResult, Status};

use crate::error::{Error, Result};

/// A solver that can load a model and return primal values.
pub trait LpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, model: &LinearModel, opts: &SolveOptions) -> Result<SolveResult>;
}

/// Dense bounded revised simplex shipped with the crate.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceSimplex;

impl LpBackend for ReferenceSimplex {
    fn name(&self) -> &str {
        "reference-simplex"
    }

    fn solve(&self, model: &LinearModel, opts: &SolveOptions) -> Result<SolveResult> {
        Simplex::new(model, opts.clone()).solve()
    }
}

/// Solves a continuous model with the reference backend.
pub fn solve_lp(model: &LinearModel, opts: &SolveOptions) -> Result<SolveResult> {
    if model.has_integers() {
        return Err(Error::Model("solve_lp called on a model with integer variables; use solve_mip".into()));
    }
    ReferenceSimplex.solve(model, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn single_lower_bound_row() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, INF, 1.0).unwrap();
        m.add_con("c", vec![(x, 1.0)], Relation::Ge, 3.0).unwrap();
        let r = solve_lp(&m, &opts()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-9 && (r.objective - 3.0).abs() < 1e-9);
        assert!((r.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_optimum_set() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, INF, 1.0).unwrap();
        let y = m.add_var("y", 0.0, INF, 1.0).unwrap();
        m.add_con("c", vec![(x, 1.0), (y, 1.0)], Relation::Eq, 1.0).unwrap();
        let r = solve_lp(&m, &opts()).unwrap();
        assert!((r.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, INF, 1.0).unwrap();
        m.add_con("a", vec![(x, 1.0)], Relation::Ge, 1.0).unwrap();
        m.add_con("b", vec![(x, 1.0)], Relation::Le, 0.0).unwrap();
        assert_eq!(solve_lp(&m, &opts()).unwrap().status, Status::Infeasible);

        let mut u = LinearModel::new();
        let x = u.add_var("x", f64::NEG_INFINITY, INF, -1.0).unwrap();
        u.add_con("a", vec![(x, 1.0)], Relation::Ge, 1.0).unwrap();
        assert_eq!(solve_lp(&u, &opts()).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn empty_row_handling() {
        let mut m = LinearModel::new();
        m.add_var("x", 0.0, 1.0, 1.0).unwrap();
        m.add_con("e", vec![], Relation::Le, 2.0).unwrap();
        assert_eq!(solve_lp(&m, &opts()).unwrap().status, Status::Optimal);
        m.add_con("f", vec![], Relation::Ge, 2.0).unwrap();
        assert_eq!(solve_lp(&m, &opts()).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn integer_model_is_refused_by_solve_lp() {
        let mut m = LinearModel::new();
        m.add_int_var("x", 0.0, 1.0, 1.0).unwrap();
        assert!(solve_lp(&m, &opts()).is_err());
    }

    #[test]
    fn forced_round_up() {
        // x = 5b, b binary, x >= 3.
        let mut m = LinearModel::new();
        let b = m.add_int_var("b", 0.0, 1.0, 0.0).unwrap();
        let x = m.add_var("x", 0.0, INF, 1.0).unwrap();
        m.add_con("link", vec![(x, 1.0), (b, -5.0)], Relation::Eq, 0.0).unwrap();
        m.add_con("min", vec![(x, 1.0)], Relation::Ge, 3.0).unwrap();
        let r = solve_mip(&m, &MipOptions::default()).unwrap();
        assert!(r.proven);
        assert_eq!(r.result.status, Status::Optimal);
        assert!((r.result.x[x.0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_matches_enumeration() {
        // max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5, binaries (as a minimization).
        let (w, v) = ([2.0, 3.0, 1.0], [5.0, 4.0, 3.0]);
        let mut m = LinearModel::new();
        let ids: Vec<VarId> = (0..3).map(|i| m.add_int_var(format!("x{i}"), 0.0, 1.0, -v[i]).unwrap()).collect();
        m.add_con("cap", ids.iter().zip(w).map(|(&i, w)| (i, w)).collect(), Relation::Le, 5.0).unwrap();
        let r = solve_mip(&m, &MipOptions::default()).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0..8u32 {
            let bits: Vec<f64> = (0..3).map(|i| f64::from((mask >> i) & 1)).collect();
            if bits.iter().zip(w).map(|(b, w)| b * w).sum::<f64>() <= 5.0 {
                best = best.min(-bits.iter().zip(v).map(|(b, v)| b * v).sum::<f64>());
            }
        }
        assert!((r.result.objective - best).abs() < 1e-9);
    }

    #[test]
    fn totally_unimodular_model_matches_lp() {
        // Assignment problem: relaxation is integral.
        let cost = [[4.0, 2.0, 8.0], [4.0, 3.0, 7.0], [3.0, 1.0, 6.0]];
        let mut m = LinearModel::new();
        let mut ids = vec![];
        for (i, row) in cost.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                ids.push(m.add_int_var(format!("x{i}{j}"), 0.0, 1.0, *c).unwrap());
            }
        }
        for i in 0..3 {
            m.add_con(format!("r{i}"), (0..3).map(|j| (ids[i * 3 + j], 1.0)).collect(), Relation::Eq, 1.0).unwrap();
            m.add_con(format!("c{i}"), (0..3).map(|j| (ids[j * 3 + i], 1.0)).collect(), Relation::Eq, 1.0).unwrap();
        }
        let mip = solve_mip(&m, &MipOptions::default()).unwrap();
        let lp = ReferenceSimplex.solve(&m, &opts()).unwrap();
        assert!((mip.result.objective - lp.objective).abs() < 1e-9);
        assert_eq!(mip.nodes, 1);
    }

    #[test]
    fn ceiling_is_enforced() {
        let mut m = LinearModel::new();
        for i in 0..3 {
            m.add_int_var(format!("x{i}"), 0.0, 1.0, 1.0).unwrap();
        }
        let o = MipOptions { max_vars: 2, ..MipOptions::default() };
        let err = solve_mip(&m, &o).unwrap_err().to_string();
        assert!(err.contains("PRANOS"), "{err}");
    }

    #[test]
    fn warm_column_addition() {
        // min 10 s  s.t. s >= 4 (only expensive column), then add a cheap one.
        let mut m = LinearModel::new();
        let s = m.add_var("s", 0.0, INF, 10.0).unwrap();
        m.add_con("d", vec![(s, 1.0)], Relation::Eq, 4.0).unwrap();
        m.add_con("cap", vec![], Relation::Le, 3.0).unwrap();
        let mut sx = Simplex::new(&m, opts());
        assert!((sx.solve().unwrap().objective - 40.0).abs() < 1e-9);
        sx.add_column(1.0, 0.0, INF, &[(0, 1.0), (1, 1.0)]);
        let r = sx.resolve().unwrap();
        assert!((r.objective - (3.0 + 10.0)).abs() < 1e-9);
        assert!(r.duals[1] <= 0.0);
    }

    fn random_model(seed: u64, nv: usize, nc: usize) -> LinearModel {
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 1000) as f64 / 100.0
        };
        let mut m = LinearModel::new();
        let ids: Vec<VarId> =
            (0..nv).map(|i| m.add_var(format!("x{i}"), 0.0, 1.0 + next(), next() - 3.0).unwrap()).collect();
        for c in 0..nc {
            let coeffs = ids.iter().map(|&v| (v, next() - 2.0)).collect();
            let rel = [Relation::Le, Relation::Ge, Relation::Eq][c % 3];
            let rhs = if rel == Relation::Eq { 0.5 } else { next() - 2.0 };
            m.add_con(format!("c{c}"), coeffs, rel, rhs).unwrap();
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimal_solutions_are_feasible_and_round_trip(seed in any::<u64>(), nv in 2usize..8, nc in 1usize..6) {
            let m = random_model(seed, nv, nc);
            let r = solve_lp(&m, &opts()).unwrap();
            if r.status == Status::Optimal {
                prop_assert!(m.max_violation(&r.x) <= 1e-6);
                let dot = m.objective_of(&r.x);
                prop_assert!((dot - r.objective).abs() <= 1e-6 * dot.abs().max(1.0));
                let again = solve_lp(&LinearModel::from_text(&m.to_text()).unwrap(), &opts()).unwrap();
                prop_assert!((again.objective - r.objective).abs() <= 1e-9 * r.objective.abs().max(1.0));
            }
        }

        #[test]
        fn relaxation_bounds_integral_points(seed in any::<u64>(), nv in 2usize..6, nc in 1usize..4) {
            let mut m = random_model(seed, nv, nc);
            for j in 0..nv {
                m.set_bounds(VarId(j), 0.0, 1.0);
            }
            let lp = solve_lp(&m, &opts()).unwrap();
            let mut int_model = LinearModel::new();
            for v in m.vars() {
                int_model.add_int_var(v.name.clone(), v.lb, v.ub, v.obj).unwrap();
            }
            for c in m.cons() {
                int_model.add_con(c.name.clone(), c.coeffs.clone(), c.rel, c.rhs).unwrap();
            }
            let mip = solve_mip(&int_model, &MipOptions::default()).unwrap();
            let mut best = f64::INFINITY;
            for mask in 0..(1u32 << nv) {
                let x: Vec<f64> = (0..nv).map(|i| f64::from((mask >> i) & 1)).collect();
                if m.max_violation(&x) <= 1e-9 {
                    best = best.min(m.objective_of(&x));
                    prop_assert!(lp.status == Status::Optimal);
                    prop_assert!(lp.objective <= m.objective_of(&x) + 1e-7);
                }
            }
            if best.is_finite() {
                prop_assert_eq!(mip.result.status, Status::Optimal);
                prop_assert!((mip.result.objective - best).abs() <= 1e-6);
            } else {
                prop_assert_eq!(mip.result.status, Status::Infeasible);
            }
        }

        #[test]
        fn class_branching_matches_enumeration(
            items in proptest::collection::vec((1u8..5, 0u8..4), 1..=5),
            bins in proptest::collection::vec((0u8..7, 1u8..5), 1..=3),
        ) {
            // Each item goes to one bin or is dropped at a high price.
            let mut m = LinearModel::new();
            let mut caps: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); bins.len()];
            let mut drops = Vec::new();
            let mut families = Vec::new();
            for (i, &(w, extra)) in items.iter().enumerate() {
                let drop = m.add_int_var(format!("r{i}"), 0.0, 1.0, 100.0).unwrap();
                let mut row = vec![(drop, 1.0)];
                let mut family = Vec::new();
                for (b, &(_, cost)) in bins.iter().enumerate() {
                    let y = m.add_int_var(format!("y{i}_{b}"), 0.0, 1.0, f64::from(cost * w + extra)).unwrap();
                    row.push((y, 1.0));
                    caps[b].push((y, f64::from(w)));
                    family.push((y, b));
                }
                m.add_con(format!("one{i}"), row, Relation::Eq, 1.0).unwrap();
                drops.push(drop);
                families.push(family);
            }
            for (b, row) in caps.into_iter().enumerate() {
                m.add_con(format!("cap{b}"), row, Relation::Le, f64::from(bins[b].0)).unwrap();
            }
            let plain = solve_mip(&m, &MipOptions::default()).unwrap();
            let guided = solve_mip(&m, &MipOptions { priority: drops, families, ..MipOptions::default() }).unwrap();

            let k = bins.len() + 1;
            let mut best = f64::INFINITY;
            for code in 0..k.pow(items.len() as u32) {
                let (mut load, mut cost, mut c) = (vec![0u32; bins.len()], 0.0, code);
                for &(w, extra) in &items {
                    let b = c % k;
                    c /= k;
                    if b == bins.len() {
                        cost += 100.0;
                    } else {
                        load[b] += u32::from(w);
                        cost += f64::from(bins[b].1 * w + extra);
                    }
                }
                if load.iter().zip(&bins).all(|(&l, &(cap, _))| l <= u32::from(cap)) {
                    best = f64::min(best, cost);
                }
            }
            for r in [&plain, &guided] {
                prop_assert!(r.proven);
                prop_assert!((r.result.objective - best).abs() <= 1e-6, "{} vs {best}", r.result.objective);
            }
        }
    }
}
