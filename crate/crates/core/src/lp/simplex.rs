//! Bounded revised simplex with an explicit dense basis inverse.
//!
//! Every row gets a slack column whose bounds encode the row relation, plus
//! an artificial column used only while searching for a first feasible
//! basis. The primal method prices with Dantzig's rule and falls back to
//! Bland's rule after a run of degenerate pivots. A dual method reoptimizes
//! after bound changes, which is what branch-and-bound needs.

use super::model::{LinearModel, Relation, VarId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Primal feasibility tolerance used inside the method (relative to the bound magnitude).
    pub feas_tol: f64,
    /// Reduced-cost tolerance.
    pub opt_tol: f64,
    /// Smallest acceptable pivot element.
    pub pivot_tol: f64,
    pub refactor_every: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_iterations: 2_000_000, feas_tol: 1e-9, opt_tol: 1e-7, pivot_tol: 1e-9, refactor_every: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    /// Primal value per model variable (empty unless a solution exists).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals `y = c_B B^-1`; non-positive on binding `<=` rows of a minimization.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

const NONE: usize = usize::MAX;
const DEGENERATE_RUN: usize = 50;

/// Saved basis for warm starts.
#[derive(Debug, Clone)]
pub struct Basis {
    basis: Vec<usize>,
    x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Simplex {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// Column index of each model variable.
    struct_cols: Vec<usize>,
    artificial_start: usize,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    x: Vec<f64>,
    /// Column-major `m x m` basis inverse.
    binv: Vec<f64>,
    opts: SolveOptions,
    iterations: usize,
    since_refactor: usize,
    warm: bool,
    /// Iteration count when the current solve started.
    call_start: usize,
}

impl Simplex {
    pub fn new(model: &LinearModel, opts: SolveOptions) -> Self {
        let m = model.num_cons();
        let nv = model.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
        for (i, c) in model.cons().iter().enumerate() {
            for &(v, a) in &c.coeffs {
                if a != 0.0 {
                    cols[v.0].push((i, a));
                }
            }
        }
        // Merge duplicate entries of the same row.
        for col in &mut cols {
            col.sort_by_key(|e| e.0);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        let mut cost: Vec<f64> = model.vars().iter().map(|v| v.obj).collect();
        let mut lb: Vec<f64> = model.vars().iter().map(|v| v.lb).collect();
        let mut ub: Vec<f64> = model.vars().iter().map(|v| v.ub).collect();
        for (i, c) in model.cons().iter().enumerate() {
            cols.push(vec![(i, 1.0)]);
            cost.push(0.0);
            let (l, u) = match c.rel {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lb.push(l);
            ub.push(u);
        }
        let artificial_start = cols.len();
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
            cost.push(0.0);
            lb.push(0.0);
            ub.push(0.0);
        }
        let n = cols.len();
        Simplex {
            m,
            cols,
            cost,
            lb,
            ub,
            struct_cols: (0..nv).collect(),
            artificial_start,
            rhs: model.cons().iter().map(|c| c.rhs).collect(),
            basis: vec![NONE; m],
            pos: vec![NONE; n],
            x: vec![0.0; n],
            binv: vec![0.0; m * m],
            opts,
            iterations: 0,
            call_start: 0,
            since_refactor: 0,
            warm: false,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_vars(&self) -> usize {
        self.struct_cols.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn is_artificial(&self, j: usize) -> bool {
        (self.artificial_start..self.artificial_start + self.m).contains(&j)
    }

    fn tol_at(&self, bound: f64) -> f64 {
        self.opts.feas_tol * bound.abs().max(1.0)
    }

    /// Appends a structural column `(obj, [lb, ub], coefficients by row)`
    /// that starts nonbasic at its lower bound.
    pub fn add_column(&mut self, obj: f64, lb: f64, ub: f64, coeffs: &[(usize, f64)]) -> VarId {
        let j = self.cols.len();
        let mut col: Vec<(usize, f64)> = coeffs.iter().copied().filter(|e| e.1 != 0.0).collect();
        col.sort_by_key(|e| e.0);
        self.cols.push(col);
        self.cost.push(obj);
        self.lb.push(lb);
        self.ub.push(ub);
        self.pos.push(NONE);
        let start = initial_value(lb, ub);
        self.x.push(start);
        if self.warm && start != 0.0 {
            self.recompute_basics();
        }
        self.struct_cols.push(j);
        VarId(self.struct_cols.len() - 1)
    }

    pub fn set_bounds(&mut self, v: VarId, lb: f64, ub: f64) {
        let j = self.struct_cols[v.0];
        self.lb[j] = lb;
        self.ub[j] = ub;
        if self.pos[j] == NONE {
            let old = self.x[j];
            let new = if old < lb || (old > ub && lb == ub) {
                lb
            } else if old > ub {
                ub
            } else if !(old == lb || old == ub) && lb.is_finite() {
                // A free nonbasic value that is no longer free.
                if ub.is_finite() && (ub - old).abs() < (old - lb).abs() {
                    ub
                } else {
                    lb
                }
            } else {
                old
            };
            if new != old {
                self.x[j] = new;
                if self.warm {
                    self.recompute_basics();
                }
            }
        }
    }

    pub fn bounds(&self, v: VarId) -> (f64, f64) {
        let j = self.struct_cols[v.0];
        (self.lb[j], self.ub[j])
    }

    pub fn save_basis(&self) -> Basis {
        Basis { basis: self.basis.clone(), x: self.x.clone() }
    }

    /// Restores a saved basis (bounds are not part of the snapshot).
    pub fn load_basis(&mut self, b: &Basis) -> Result<()> {
        if b.basis.len() != self.m || b.x.len() > self.x.len() {
            return Err(Error::Internal("basis snapshot does not fit the model".into()));
        }
        self.basis.clone_from(&b.basis);
        self.x[..b.x.len()].copy_from_slice(&b.x);
        self.pos.iter_mut().for_each(|p| *p = NONE);
        for (r, &j) in self.basis.iter().enumerate() {
            self.pos[j] = r;
        }
        for j in 0..self.x.len() {
            if self.pos[j] == NONE {
                let (l, u) = (self.lb[j], self.ub[j]);
                if self.x[j] < l
                    || self.x[j] > u
                    || !(self.x[j] == l || self.x[j] == u || (l == f64::NEG_INFINITY && u == f64::INFINITY))
                {
                    self.x[j] = initial_value(l, u);
                }
            }
        }
        self.refactor()?;
        self.warm = true;
        Ok(())
    }

    /// Solves from scratch (two phases).
    pub fn solve(&mut self) -> Result<SolveResult> {
        self.call_start = self.iterations;
        let status = self.cold_solve()?;
        Ok(self.result(status))
    }

    /// Re-solves after column additions or bound changes, reusing the
    /// current basis when possible.
    pub fn resolve(&mut self) -> Result<SolveResult> {
        if !self.warm {
            return self.solve();
        }
        self.call_start = self.iterations;
        let status = if self.primal_feasible() {
            self.primal(false)?
        } else if self.dual_feasible() {
            match self.dual()? {
                Status::Optimal => self.primal(false)?,
                s => s,
            }
        } else {
            self.cold_solve()?
        };
        Ok(self.result(status))
    }

    fn cold_solve(&mut self) -> Result<Status> {
        let n = self.cols.len();
        self.pos = vec![NONE; n];
        for j in 0..n {
            if !self.is_artificial(j) {
                self.x[j] = initial_value(self.lb[j], self.ub[j]);
            }
        }
        let mut resid = self.rhs.clone();
        for j in 0..n {
            if !self.is_artificial(j) && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    resid[i] -= a * self.x[j];
                }
            }
        }
        for j in self.artificial_start..n.min(self.artificial_start + self.m) {
            self.x[j] = 0.0;
        }
        let slack0 = self.artificial_start - self.m;
        let mut need_phase1 = false;
        for i in 0..self.m {
            let s = slack0 + i;
            let art = self.artificial_start + i;
            // The slack already has value x[s] from its initial bound; add back.
            let r = resid[i] + self.x[s];
            if r >= self.lb[s] && r <= self.ub[s] {
                self.x[s] = r;
                self.basis[i] = s;
                self.pos[s] = i;
                self.lb[art] = 0.0;
                self.ub[art] = 0.0;
                self.cols[art] = vec![(i, 1.0)];
            } else {
                let clamp = r.clamp(self.lb[s], self.ub[s]);
                self.x[s] = clamp;
                let gap = r - clamp;
                self.cols[art] = vec![(i, gap.signum())];
                self.lb[art] = 0.0;
                self.ub[art] = f64::INFINITY;
                self.x[art] = gap.abs();
                self.basis[i] = art;
                self.pos[art] = i;
                need_phase1 = true;
            }
        }
        self.refactor()?;
        self.warm = true;
        if need_phase1 {
            let status = self.primal(true)?;
            if status == Status::IterationLimit {
                return Ok(status);
            }
            let infeas: f64 = (0..self.m).map(|i| self.x[self.artificial_start + i]).sum();
            let scale = self.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            if infeas > 1e-8 * scale {
                return Ok(Status::Infeasible);
            }
            for i in 0..self.m {
                let art = self.artificial_start + i;
                self.ub[art] = 0.0;
                if self.pos[art] == NONE {
                    self.x[art] = 0.0;
                }
            }
        }
        self.primal(false)
    }

    fn phase_cost(&self, phase1: bool, j: usize) -> f64 {
        if phase1 {
            if self.is_artificial(j) && self.ub[j] > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.cost[j]
        }
    }

    fn btran(&self, phase1: bool) -> Vec<f64> {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.phase_cost(phase1, j)).collect();
        (0..m).map(|j| dot(&cb, &self.binv[j * m..(j + 1) * m])).collect()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut v = vec![0.0; m];
        for &(i, a) in &self.cols[j] {
            let col = &self.binv[i * m..(i + 1) * m];
            for (vk, ck) in v.iter_mut().zip(col) {
                *vk += a * ck;
            }
        }
        v
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        self.phase_cost(phase1, j) - self.cols[j].iter().map(|&(i, a)| a * y[i]).sum::<f64>()
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        for j in 0..m {
            let col = &mut self.binv[j * m..(j + 1) * m];
            let t = col[r];
            if t == 0.0 {
                continue;
            }
            let t = t / ar;
            for (i, c) in col.iter_mut().enumerate() {
                *c -= alpha[i] * t;
            }
            col[r] = t;
        }
        let old = self.basis[r];
        self.pos[old] = NONE;
        self.basis[r] = q;
        self.pos[q] = r;
        self.since_refactor += 1;
        self.iterations += 1;
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        // Row-major dense B, inverted by Gauss-Jordan with partial pivoting.
        let mut b = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                b[i * m + k] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m).max_by(|&a, &b2| b[a * m + c].abs().total_cmp(&b[b2 * m + c].abs())).unwrap_or(c);
            if b[p * m + c].abs() < 1e-12 {
                return Err(Error::Internal("singular basis during refactorization".into()));
            }
            if p != c {
                for k in 0..m {
                    b.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = b[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    b[r * m + k] -= f * b[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        // inv is row-major B^-1 where row index = basis position; store column-major.
        for r in 0..m {
            for c in 0..m {
                self.binv[c * m + r] = inv[r * m + c];
            }
        }
        self.since_refactor = 0;
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut resid = self.rhs.clone();
        for j in 0..self.cols.len() {
            if self.pos[j] == NONE && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    resid[i] -= a * self.x[j];
                }
            }
        }
        let mut xb = vec![0.0; m];
        for (i, &ri) in resid.iter().enumerate() {
            if ri != 0.0 {
                let col = &self.binv[i * m..(i + 1) * m];
                for (v, c) in xb.iter_mut().zip(col) {
                    *v += ri * c;
                }
            }
        }
        for (r, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[r];
        }
    }

    fn primal_feasible(&self) -> bool {
        self.basis.iter().all(|&j| {
            let x = self.x[j];
            x >= self.lb[j] - self.tol_at(self.lb[j]) && x <= self.ub[j] + self.tol_at(self.ub[j])
        })
    }

    fn dual_feasible(&self) -> bool {
        let y = self.btran(false);
        (0..self.cols.len()).all(|j| {
            if self.pos[j] != NONE || self.lb[j] == self.ub[j] {
                return true;
            }
            let d = self.reduced_cost(j, &y, false);
            let (can_up, can_down) = (self.x[j] < self.ub[j], self.x[j] > self.lb[j]);
            !(d < -self.opts.opt_tol && can_up) && !(d > self.opts.opt_tol && can_down)
        })
    }

    fn primal(&mut self, phase1: bool) -> Result<Status> {
        let mut degenerate = 0usize;
        loop {
            if self.iterations - self.call_start >= self.opts.max_iterations {
                return Ok(Status::IterationLimit);
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let bland = degenerate > DEGENERATE_RUN;
            let y = self.btran(phase1);
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..self.cols.len() {
                if self.pos[j] != NONE || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y, phase1);
                let dir = if d < -self.opts.opt_tol && self.x[j] < self.ub[j] {
                    1.0
                } else if d > self.opts.opt_tol && self.x[j] > self.lb[j] {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    enter = Some((j, dir, d));
                    break;
                }
                if enter.is_none_or(|(_, _, bd)| d.abs() > bd.abs()) {
                    enter = Some((j, dir, d));
                }
            }
            let Some((q, dir, dq)) = enter else {
                return Ok(Status::Optimal);
            };
            let alpha = self.ftran(q);
            let flip = self.ub[q] - self.lb[q];

            // Harris pass 1: largest step keeping every basic within tolerance.
            let mut theta_max = flip;
            for (i, &ai) in alpha.iter().enumerate() {
                let a = dir * ai;
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let b = self.basis[i];
                let t = if a > 0.0 {
                    if self.lb[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (self.x[b] - self.lb[b] + self.tol_at(self.lb[b])) / a
                } else {
                    if self.ub[b] == f64::INFINITY {
                        continue;
                    }
                    (self.ub[b] - self.x[b] + self.tol_at(self.ub[b])) / -a
                };
                theta_max = theta_max.min(t);
            }
            if theta_max == f64::INFINITY {
                return Ok(Status::Unbounded);
            }
            // Pass 2: among rows whose exact ratio fits, take the largest pivot.
            let mut leave: Option<(usize, f64, f64)> = None;
            for (i, &ai) in alpha.iter().enumerate() {
                let a = dir * ai;
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let b = self.basis[i];
                let t = if a > 0.0 {
                    if self.lb[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (self.x[b] - self.lb[b]) / a
                } else {
                    if self.ub[b] == f64::INFINITY {
                        continue;
                    }
                    (self.ub[b] - self.x[b]) / -a
                };
                if t > theta_max {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((r, bt, ba)) => {
                        if bland {
                            t < bt - 1e-12 || (t <= bt + 1e-12 && b < self.basis[r])
                        } else {
                            a.abs() > ba
                        }
                    }
                };
                if better {
                    leave = Some((i, t, a.abs()));
                }
            }
            let (theta, row) = match leave {
                Some((r, t, _)) if t < flip => (t.max(0.0), Some(r)),
                _ => (flip, None),
            };
            if theta * dq.abs() <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            if theta != 0.0 {
                for (r, &ai) in alpha.iter().enumerate() {
                    let b = self.basis[r];
                    self.x[b] -= dir * theta * ai;
                }
            }
            match row {
                None => {
                    self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] };
                    self.iterations += 1;
                }
                Some(r) => {
                    self.x[q] += dir * theta;
                    let b = self.basis[r];
                    self.x[b] = if dir * alpha[r] > 0.0 { self.lb[b] } else { self.ub[b] };
                    self.pivot(r, q, &alpha);
                }
            }
        }
    }

    /// Bounded dual simplex from a dual-feasible basis.
    fn dual(&mut self) -> Result<Status> {
        let m = self.m;
        loop {
            if self.iterations - self.call_start >= self.opts.max_iterations {
                return Ok(Status::IterationLimit);
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let j = self.basis[r];
                let x = self.x[j];
                let viol = if x < self.lb[j] - self.tol_at(self.lb[j]) {
                    self.lb[j] - x
                } else if x > self.ub[j] + self.tol_at(self.ub[j]) {
                    x - self.ub[j]
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, v)| viol > v) {
                    leave = Some((r, viol));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Status::Optimal);
            };
            let jr = self.basis[r];
            let to_lower = self.x[jr] < self.lb[jr];
            let target = if to_lower { self.lb[jr] } else { self.ub[jr] };
            let y = self.btran(false);
            let rho: Vec<f64> = (0..m).map(|i| self.binv[i * m + r]).collect();
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..self.cols.len() {
                if self.pos[j] != NONE || self.lb[j] == self.ub[j] {
                    continue;
                }
                let arj: f64 = self.cols[j].iter().map(|&(i, a)| a * rho[i]).sum();
                if arj.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let (can_up, can_down) = (self.x[j] < self.ub[j], self.x[j] > self.lb[j]);
                // x_r moves by -arj * dx_j.
                let ok = if to_lower {
                    (can_up && arj < 0.0) || (can_down && arj > 0.0)
                } else {
                    (can_up && arj > 0.0) || (can_down && arj < 0.0)
                };
                if !ok {
                    continue;
                }
                let d = self.reduced_cost(j, &y, false);
                let ratio = d.abs() / arj.abs();
                let better = match enter {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && arj.abs() > ba),
                };
                if better {
                    enter = Some((j, ratio, arj.abs()));
                }
            }
            let Some((q, _, _)) = enter else {
                return Ok(Status::Infeasible);
            };
            let alpha = self.ftran(q);
            let delta = (self.x[jr] - target) / alpha[r];
            self.x[q] += delta;
            for (i, &ai) in alpha.iter().enumerate() {
                let b = self.basis[i];
                self.x[b] -= delta * ai;
            }
            self.x[jr] = target;
            self.pivot(r, q, &alpha);
        }
    }

    fn result(&mut self, status: Status) -> SolveResult {
        let iterations = self.iterations;
        if status != Status::Optimal {
            return SolveResult { status, x: Vec::new(), objective: f64::NAN, duals: Vec::new(), iterations };
        }
        let x: Vec<f64> = self
            .struct_cols
            .iter()
            .map(|&j| {
                let v = self.x[j];
                if v < self.lb[j] {
                    self.lb[j]
                } else if v > self.ub[j] {
                    self.ub[j]
                } else {
                    v
                }
            })
            .collect();
        let objective = self.struct_cols.iter().zip(&x).map(|(&j, v)| self.cost[j] * v).sum();
        let duals = self.btran(false);
        SolveResult { status, x, objective, duals, iterations }
    }
}

fn initial_value(lb: f64, ub: f64) -> f64 {
    if lb.is_finite() {
        lb
    } else if ub.is_finite() {
        ub
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
