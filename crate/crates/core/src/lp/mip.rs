use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::model::{LinearModel, VarId};
use super::simplex::{Basis, Simplex, SolveOptions, SolveResult, Status};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub lp: SolveOptions,
    pub node_limit: usize,
    pub max_vars: usize,
    pub max_cons: usize,
    pub int_tol: f64,
    /// Integer variables branched on before any other fractional one.
    pub priority: Vec<VarId>,
    /// Binary variables of which at most one is 1, each tagged with a class.
    /// Once `priority` is integral, a class with fractional total is branched
    /// on as a whole: off, or every other member of the family off.
    pub families: Vec<Vec<(VarId, usize)>>,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            lp: SolveOptions::default(),
            node_limit: 200_000,
            max_vars: 20_000,
            max_cons: 5_000,
            int_tol: 1e-6,
            priority: Vec::new(),
            families: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MipResult {
    pub result: SolveResult,
    pub nodes: usize,
    /// True when the search finished (optimality or infeasibility proven).
    pub proven: bool,
}

struct Node {
    bound: f64,
    seq: usize,
    fixes: Vec<(usize, f64, f64)>,
    /// Solve that produced `basis`.
    origin: usize,
    basis: Basis,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Best (lowest) bound first, then the newest node.
        other.bound.total_cmp(&self.bound).then_with(|| self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Branch-and-bound over the reference simplex: most-fractional branching
/// (ties to the lowest variable id), best-bound node selection, dual simplex
/// warm starts from the parent basis. `priority` and `families` only change
/// which variable is branched on; with both empty the rule is plain
/// most-fractional. Reduced costs against the incumbent fix variables in
/// each subtree.
pub fn solve_mip(model: &LinearModel, opts: &MipOptions) -> Result<MipResult> {
    if model.num_vars() > opts.max_vars || model.num_cons() > opts.max_cons {
        return Err(Error::TooLarge(format!(
            "{} variables and {} constraints exceed the ceiling of {} and {}",
            model.num_vars(),
            model.num_cons(),
            opts.max_vars,
            opts.max_cons
        )));
    }
    let ints: Vec<usize> = (0..model.num_vars()).filter(|&j| model.vars()[j].integer).collect();
    let first: Vec<usize> = opts.priority.iter().map(|v| v.0).filter(|&j| model.vars()[j].integer).collect();
    let base: Vec<(f64, f64)> = model.vars().iter().map(|v| (v.lb, v.ub)).collect();
    let obj: Vec<f64> = model.vars().iter().map(|v| v.obj).collect();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, c) in model.cons().iter().enumerate() {
        for &(v, a) in &c.coeffs {
            cols[v.0].push((i, a));
        }
    }
    let mut lp = Simplex::new(model, opts.lp.clone());
    let root = lp.solve()?;
    match root.status {
        Status::Optimal => {}
        s => return Ok(MipResult { result: root, nodes: 1, proven: s != Status::IterationLimit }),
    }

    let mut incumbent: Option<SolveResult> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let mut applied: Vec<usize> = Vec::new();
    let mut pending = Some((root, Vec::new()));
    // Id of the solve whose basis the simplex currently holds.
    let mut solves = 0usize;

    loop {
        if let Some((res, fixes)) = pending.take() {
            nodes += 1;
            let improves = incumbent
                .as_ref()
                .is_none_or(|inc| res.objective < inc.objective - 1e-9 * inc.objective.abs().max(1.0));
            if res.status == Status::Optimal && improves {
                let branches = match most_fractional(&res.x, &first, opts.int_tol) {
                    Some(j) => Some(split_var(&res.x, j, &fixes, base[j])),
                    None => match fractional_class(&res.x, &opts.families, opts.int_tol) {
                        Some((f, class)) => Some(split_class(&opts.families[f], class)),
                        None => {
                            most_fractional(&res.x, &ints, opts.int_tol).map(|j| split_var(&res.x, j, &fixes, base[j]))
                        }
                    },
                };
                match branches {
                    None => {
                        let mut r = res;
                        for &j in &ints {
                            r.x[j] = r.x[j].round();
                        }
                        r.objective = model.objective_of(&r.x);
                        incumbent = Some(r);
                    }
                    Some(children) => {
                        let basis = lp.save_basis();
                        let mut fixes = fixes;
                        if let Some(inc) = &incumbent {
                            fixes.extend(reduced_cost_fixes(&res, &obj, &cols, &ints, &fixes, &base, inc.objective));
                        }
                        for extra in children {
                            let mut f = fixes.clone();
                            f.extend(extra);
                            heap.push(Node {
                                bound: res.objective,
                                seq,
                                fixes: f,
                                origin: solves,
                                basis: basis.clone(),
                            });
                            seq += 1;
                        }
                    }
                }
            }
        }
        let Some(node) = heap.pop() else { break };
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - 1e-9 * inc.objective.abs().max(1.0) {
                continue;
            }
        }
        if nodes >= opts.node_limit {
            let mut r = incumbent.unwrap_or(SolveResult {
                status: Status::IterationLimit,
                x: Vec::new(),
                objective: f64::NAN,
                duals: Vec::new(),
                iterations: lp.iterations(),
            });
            r.status = Status::IterationLimit;
            return Ok(MipResult { result: r, nodes, proven: false });
        }
        for &j in &applied {
            lp.set_bounds(VarId(j), base[j].0, base[j].1);
        }
        applied.clear();
        // A child popped right after its parent finds the parent basis in place.
        if node.origin != solves {
            lp.load_basis(&node.basis)?;
        }
        for &(j, l, u) in &node.fixes {
            lp.set_bounds(VarId(j), l, u);
            applied.push(j);
        }
        let res = lp.resolve()?;
        solves += 1;
        if res.status == Status::IterationLimit {
            return Ok(MipResult { result: res, nodes, proven: false });
        }
        pending = Some((res, node.fixes));
    }
    let result = incumbent.unwrap_or(SolveResult {
        status: Status::Infeasible,
        x: Vec::new(),
        objective: f64::NAN,
        duals: Vec::new(),
        iterations: lp.iterations(),
    });
    Ok(MipResult { result, nodes, proven: true })
}

/// Integer variables resting at a bound whose reduced cost alone lifts the
/// node bound past the incumbent stay at that bound in the whole subtree.
fn reduced_cost_fixes(
    res: &SolveResult,
    obj: &[f64],
    cols: &[Vec<(usize, f64)>],
    ints: &[usize],
    fixes: &[(usize, f64, f64)],
    base: &[(f64, f64)],
    incumbent: f64,
) -> Fixes {
    let gap = incumbent - res.objective - 1e-9 * incumbent.abs().max(1.0);
    let mut out = Vec::new();
    for &j in ints {
        let (lo, hi) = current_bounds(fixes, j, base[j]);
        if lo == hi || !(hi - lo).is_finite() {
            continue;
        }
        let d = cols[j].iter().fold(obj[j], |acc, &(i, a)| acc - a * res.duals[i]);
        let x = res.x[j];
        if x <= lo + 1e-9 && d * (hi - lo) > gap {
            out.push((j, lo, lo));
        } else if x >= hi - 1e-9 && -d * (hi - lo) > gap {
            out.push((j, hi, hi));
        }
    }
    out
}

/// Later fixes override earlier ones.
fn current_bounds(fixes: &[(usize, f64, f64)], j: usize, base: (f64, f64)) -> (f64, f64) {
    fixes.iter().rev().find(|f| f.0 == j).map_or(base, |&(_, l, u)| (l, u))
}

type Fixes = Vec<(usize, f64, f64)>;

fn split_var(x: &[f64], j: usize, fixes: &[(usize, f64, f64)], base: (f64, f64)) -> [Fixes; 2] {
    let (lo, hi) = current_bounds(fixes, j, base);
    [vec![(j, lo, x[j].floor())], vec![(j, x[j].ceil(), hi)]]
}

fn fractional_class(x: &[f64], families: &[Vec<(VarId, usize)>], tol: f64) -> Option<(usize, usize)> {
    for (f, members) in families.iter().enumerate() {
        let mut sums: Vec<(usize, f64)> = Vec::new();
        for &(v, class) in members {
            match sums.iter_mut().find(|s| s.0 == class) {
                Some(s) => s.1 += x[v.0],
                None => sums.push((class, x[v.0])),
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (class, s) in sums {
            let dist = s.min(1.0 - s);
            if dist > tol && best.is_none_or(|(_, b)| dist > b + 1e-12) {
                best = Some((class, dist));
            }
        }
        if let Some((c, _)) = best {
            return Some((f, c));
        }
    }
    None
}

fn split_class(members: &[(VarId, usize)], class: usize) -> [Fixes; 2] {
    let off = |keep: bool| members.iter().filter(|m| (m.1 == class) != keep).map(|m| (m.0 .0, 0.0, 0.0)).collect();
    [off(false), off(true)]
}

fn most_fractional(x: &[f64], ints: &[usize], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in ints {
        let f = x[j] - x[j].floor();
        let dist = f.min(1.0 - f);
        if dist > tol && best.is_none_or(|(_, b)| dist > b + 1e-12) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}
