//! Per-user greedy comparator.
//!
//! A stand-in for a cost-driven greedy heuristic: users arrive one at a time
//! and each function goes to the DC with the smallest incremental cost,
//! reached over the cheapest admissible path with enough residual capacity.
//! There is no backtracking across users.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::latency::LatencyTables;
use crate::model::{
    Application, ArcId, DcId, Deployment, FunctionKind, LogicalLinkId, SubstrateNetwork, User, UserEmbedding, ROOT,
};

/// How candidate paths between two hosts are produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathStrategy {
    /// Cheapest path over arcs admissible for the current host.
    #[default]
    MinCost,
}

/// How candidate hosts are ranked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scoring {
    /// ξ-weighted node cost plus the path cost to reach it.
    #[default]
    Incremental,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub paths: PathStrategy,
    pub scoring: Scoring,
    /// Shuffles the arrival order when set; input order otherwise.
    pub order_seed: Option<u64>,
}

/// A deployment method that can stand next to the planner in experiments.
pub trait Comparator: Send + Sync {
    fn name(&self) -> &str;
    fn deploy(
        &self,
        net: &SubstrateNetwork,
        apps: &[Application],
        users: &[User],
        tables: &LatencyTables,
    ) -> Result<Deployment>;
}

#[derive(Debug, Clone, Default)]
pub struct GreedyBaseline(pub GreedyConfig);

impl Comparator for GreedyBaseline {
    fn name(&self) -> &str {
        "baseline"
    }

    fn deploy(
        &self,
        net: &SubstrateNetwork,
        apps: &[Application],
        users: &[User],
        tables: &LatencyTables,
    ) -> Result<Deployment> {
        solve_greedy_baseline(net, apps, users, tables, &self.0)
    }
}

struct Residual {
    dc: Vec<f64>,
    link: Vec<f64>,
    /// Requirements at the largest demand, per resource. Bumping
    /// `generation` whenever one of them changes side invalidates cached
    /// look-ahead tables.
    dc_marks: Vec<Vec<f64>>,
    link_marks: Vec<Vec<f64>>,
    generation: u64,
}

fn fits(need: f64, residual: f64) -> bool {
    need <= residual + 1e-9 * residual.abs().max(1.0)
}

impl Residual {
    fn take_dc(&mut self, d: usize, amount: f64) {
        let before = self.dc[d];
        self.dc[d] -= amount;
        if self.dc_marks[d].iter().any(|&m| fits(m, before) != fits(m, self.dc[d])) {
            self.generation += 1;
        }
    }

    fn take_link(&mut self, l: usize, amount: f64) {
        let before = self.link[l];
        self.link[l] -= amount;
        if self.link_marks[l].iter().any(|&m| fits(m, before) != fits(m, self.link[l])) {
            self.generation += 1;
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, DcId);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn solve_greedy_baseline(
    net: &SubstrateNetwork,
    apps: &[Application],
    users: &[User],
    tables: &LatencyTables,
    cfg: &GreedyConfig,
) -> Result<Deployment> {
    let mut order: Vec<usize> = (0..users.len()).collect();
    if let Some(seed) = cfg.order_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let dem_max = users.iter().map(|u| u.demand).fold(0.0, f64::max);
    let mut dc_marks = vec![Vec::new(); net.num_dcs()];
    let mut link_marks = vec![Vec::new(); net.num_links()];
    for app in apps {
        for f in app.vnfs() {
            for d in net.real_dcs() {
                dc_marks[d.0].push(dem_max * app.xi_node(f, d));
            }
        }
        for e in app.link_ids() {
            for (l, marks) in link_marks.iter_mut().enumerate() {
                marks.push(dem_max * app.xi_link(e, crate::model::LinkId(l)));
            }
        }
    }
    for m in dc_marks.iter_mut().chain(link_marks.iter_mut()) {
        m.sort_by(f64::total_cmp);
        m.dedup();
    }
    let mut res = Residual {
        dc: net.dcs().iter().map(|d| d.capacity).collect(),
        link: net.links().iter().map(|l| l.capacity).collect(),
        dc_marks,
        link_marks,
        generation: 0,
    };
    if let Some(s) = net.sink() {
        res.dc[s.0] = 0.0;
    }
    // Look-ahead per application computed at the largest demand, reused
    // until a resource changes side; users it rejects get an exact retry.
    let mut cache: Vec<Option<(u64, Vec<Vec<f64>>)>> = vec![None; apps.len()];
    let mut embeddings = vec![None; users.len()];
    for u in order {
        let user = &users[u];
        let app = &apps[user.app.0];
        let slot = &mut cache[user.app.0];
        if slot.as_ref().is_none_or(|(g, _)| *g != res.generation) {
            *slot = Some((res.generation, cost_to_go(net, app, dem_max, tables, &res)));
        }
        let togo = slot.as_ref().map(|(_, t)| t.clone()).unwrap_or_default();
        let mut emb = embed_user(net, app, user, tables, &mut res, &togo);
        if emb.is_none() && user.demand < dem_max {
            let exact = cost_to_go(net, app, user.demand, tables, &res);
            emb = embed_user(net, app, user, tables, &mut res, &exact);
        }
        embeddings[u] = emb;
    }
    Ok(Deployment::new(net, apps, users, embeddings))
}

fn embed_user(
    net: &SubstrateNetwork,
    app: &Application,
    user: &User,
    tables: &LatencyTables,
    res: &mut Residual,
    togo: &[Vec<f64>],
) -> Option<UserEmbedding> {
    let dem = user.demand;
    let mut placement = vec![user.dc; app.functions().len()];
    let mut paths = vec![Vec::new(); app.num_links()];
    let mut used_dc: Vec<(DcId, f64)> = Vec::new();
    let mut used_link: Vec<(usize, f64)> = Vec::new();
    let mut ok = true;
    for e in app.link_ids() {
        let link = app.link(e);
        let from = placement[link.from.0];
        if app.function(link.to).kind == FunctionKind::Terminator {
            placement[link.to.0] = from;
            continue;
        }
        let (dist, pred) = shortest(net, app, e, from, dem, tables, res);
        let mut best: Option<(f64, DcId)> = None;
        for t in hosts(net, app, e, from, dem, tables, res, &dist) {
            let score = dist[t.0] + app.xi_node(link.to, t) * net.dc(t).cost + togo[link.to.0][t.0];
            if score.is_finite() && best.is_none_or(|(s, _)| score < s - 1e-12 * s.abs().max(1.0)) {
                best = Some((score, t));
            }
        }
        let Some((_, t)) = best else {
            ok = false;
            break;
        };
        let mut path = Vec::new();
        let mut at = t;
        while let Some(a) = pred[at.0] {
            path.push(a);
            at = net.arc(a).from;
        }
        path.reverse();
        let ecu = dem * app.xi_node(link.to, t);
        res.take_dc(t.0, ecu);
        used_dc.push((t, ecu));
        for &a in &path {
            let l = net.arc(a).link;
            let bwu = dem * app.xi_link(e, l);
            res.take_link(l.0, bwu);
            used_link.push((l.0, bwu));
        }
        placement[link.to.0] = t;
        paths[e.0] = path;
    }
    if ok {
        debug_assert_eq!(placement[ROOT.0], user.dc);
        return Some(UserEmbedding { placement, paths });
    }
    for (d, ecu) in used_dc {
        res.take_dc(d.0, -ecu);
    }
    for (l, bwu) in used_link {
        res.take_link(l, -bwu);
    }
    None
}

/// `togo[f][d]`: cheapest per-ADU cost of the functions below `f` when `f`
/// sits on `d`, each hop checked on its own against the residuals at
/// demand `dem`.
fn cost_to_go(
    net: &SubstrateNetwork,
    app: &Application,
    dem: f64,
    tables: &LatencyTables,
    res: &Residual,
) -> Vec<Vec<f64>> {
    let n = net.num_dcs();
    let mut togo = vec![vec![0.0_f64; n]; app.functions().len()];
    for e in (0..app.num_links()).rev().map(LogicalLinkId) {
        let link = app.link(e);
        if app.function(link.to).kind == FunctionKind::Terminator {
            continue;
        }
        for from in net.real_dcs() {
            if !togo[link.from.0][from.0].is_finite() {
                continue;
            }
            let (dist, _) = shortest(net, app, e, from, dem, tables, res);
            let best = hosts(net, app, e, from, dem, tables, res, &dist)
                .map(|t| dist[t.0] + app.xi_node(link.to, t) * net.dc(t).cost + togo[link.to.0][t.0])
                .fold(f64::INFINITY, f64::min);
            togo[link.from.0][from.0] += best;
        }
    }
    togo
}

/// Real DCs that can host the head of `e` from `from`: reachable, within the
/// latency bound and with room for the function.
#[allow(clippy::too_many_arguments)]
fn hosts<'a>(
    net: &'a SubstrateNetwork,
    app: &'a Application,
    e: LogicalLinkId,
    from: DcId,
    dem: f64,
    tables: &'a LatencyTables,
    res: &'a Residual,
    dist: &'a [f64],
) -> impl Iterator<Item = DcId> + 'a {
    let link = app.link(e);
    net.real_dcs().filter(move |&t| {
        if !dist[t.0].is_finite() {
            return false;
        }
        if t != from {
            match tables.path_bound(from, t) {
                Some(b)
                    if link.latency_bound.is_infinite()
                        || b <= link.latency_bound + 1e-9 * link.latency_bound.abs().max(1.0) => {}
                _ => return false,
            }
        }
        fits(dem * app.xi_node(link.to, t), res.dc[t.0])
    })
}

/// Cheapest per-ADU paths from `from` over admissible arcs with room for `dem`.
fn shortest(
    net: &SubstrateNetwork,
    app: &Application,
    e: LogicalLinkId,
    from: DcId,
    dem: f64,
    tables: &LatencyTables,
    res: &Residual,
) -> (Vec<f64>, Vec<Option<ArcId>>) {
    let n = net.num_dcs();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<ArcId>> = vec![None; n];
    dist[from.0] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, from)]);
    while let Some(Item(d, v)) = heap.pop() {
        if d > dist[v.0] {
            continue;
        }
        for &a in net.out_arcs(v) {
            let arc = net.arc(a);
            let to = arc.to;
            if to == from || net.is_sink(to) || !tables.allowed(from, a) {
                continue;
            }
            let l = arc.link;
            let xi = app.xi_link(e, l);
            if !fits(dem * xi, res.link[l.0]) {
                continue;
            }
            let nd = d + xi * net.link(l).cost;
            if nd < dist[to.0] {
                dist[to.0] = nd;
                pred[to.0] = Some(a);
                heap.push(Item(nd, to));
            }
        }
    }
    (dist, pred)
}
