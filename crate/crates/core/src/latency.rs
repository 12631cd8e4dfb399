//! Shortest-path latencies and per-source arc restrictions.
//!
//! Instead of enumerating candidate paths, every source `s` gets a sign per
//! directed arc: arcs with a non-negative restriction value may carry flow
//! that originated at `s`. The longest admissible walk to each destination
//! then bounds the latency any steering path can incur.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArcId, DcId, SubstrateNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestrictionMode {
    /// Only arcs on shortest paths from the source.
    ShortestPath,
    /// Geographically monotone ("cabdriver") paths plus shortest paths.
    Cabdriver,
}

impl RestrictionMode {
    /// Cabdriver when every real DC has coordinates, shortest-path otherwise.
    pub fn auto(net: &SubstrateNetwork) -> Self {
        if net.has_geo() && net.num_real_dcs() > 0 {
            RestrictionMode::Cabdriver
        } else {
            RestrictionMode::ShortestPath
        }
    }
}

/// Step budget of the exhaustive longest-simple-path search on cyclic
/// admissible graphs, per source.
const SEARCH_BUDGET: usize = 200_000;

fn snap_eps(scale: f64) -> f64 {
    1e-9 * scale.abs().max(1.0)
}

#[derive(Debug, Clone)]
pub struct LatencyTables {
    mode: RestrictionMode,
    n: usize,
    delta: Vec<f64>,
    restriction: Vec<Vec<f64>>,
    path_bound: Vec<Option<f64>>,
    alpha_prime: f64,
    /// Sources whose bounds fell back to the analytic estimate.
    pub analytic_sources: usize,
}

impl LatencyTables {
    pub fn compute(net: &SubstrateNetwork, mode: RestrictionMode) -> Result<Self> {
        let n = net.num_dcs();
        let delta = all_pairs_latency(net)?;
        let restriction = match mode {
            RestrictionMode::ShortestPath => restrictions_shortest_path(net, &delta),
            RestrictionMode::Cabdriver => restrictions_cabdriver(net, &delta)?,
        };
        let per_source: Vec<(Vec<Option<f64>>, bool)> =
            (0..n).into_par_iter().map(|s| source_bounds(net, &restriction[s], DcId(s))).collect();
        let mut path_bound = vec![None; n * n];
        let mut analytic_sources = 0;
        for (s, (row, analytic)) in per_source.into_iter().enumerate() {
            analytic_sources += usize::from(analytic);
            path_bound[s * n..(s + 1) * n].copy_from_slice(&row);
        }
        let mut alpha_prime: f64 = 1.0;
        for s in net.real_dcs() {
            for t in net.real_dcs() {
                let d = delta[s.0][t.0];
                if let Some(b) = path_bound[s.0 * n + t.0] {
                    if d > 0.0 {
                        alpha_prime = alpha_prime.max(b / d);
                    }
                }
            }
        }
        Ok(LatencyTables {
            mode,
            n,
            delta: delta.into_iter().flatten().collect(),
            restriction,
            path_bound,
            alpha_prime,
            analytic_sources,
        })
    }

    pub fn mode(&self) -> RestrictionMode {
        self.mode
    }

    pub fn num_dcs(&self) -> usize {
        self.n
    }

    /// Shortest-path latency between real DCs (infinite when either is the sink).
    pub fn delta(&self, s: DcId, t: DcId) -> f64 {
        self.delta[s.0 * self.n + t.0]
    }

    pub fn restriction(&self, s: DcId, arc: ArcId) -> f64 {
        self.restriction[s.0][arc.0]
    }

    pub fn allowed(&self, s: DcId, arc: ArcId) -> bool {
        self.restriction[s.0][arc.0] >= 0.0
    }

    /// Largest latency of an admissible `s -> t` path; `None` when `t` cannot
    /// be reached over allowed arcs.
    pub fn path_bound(&self, s: DcId, t: DcId) -> Option<f64> {
        self.path_bound[s.0 * self.n + t.0]
    }

    /// Measured max of `path_bound(s,t) / delta(s,t)` over connected pairs.
    pub fn alpha_prime(&self) -> f64 {
        self.alpha_prime
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (latency, hops, id).
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1)).then_with(|| other.2.cmp(&self.2))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over real DCs with lexicographic (latency, hops) labels.
fn dijkstra(net: &SubstrateNetwork, s: DcId) -> (Vec<f64>, Vec<usize>) {
    let n = net.num_dcs();
    let mut dist = vec![f64::INFINITY; n];
    let mut hops = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s.0] = 0.0;
    hops[s.0] = 0;
    heap.push(Entry(0.0, 0, s.0));
    while let Some(Entry(d, h, v)) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &a in net.out_arcs(DcId(v)) {
            let arc = net.arc(a);
            if net.is_sink(arc.to) {
                continue;
            }
            let nd = d + net.link(arc.link).latency;
            let w = arc.to.0;
            if nd < dist[w] || (nd == dist[w] && h + 1 < hops[w]) {
                dist[w] = nd;
                hops[w] = h + 1;
                heap.push(Entry(nd, h + 1, w));
            }
        }
    }
    (dist, hops)
}

/// All-pairs shortest-path latency over real DCs. Rows and columns of the
/// sink stay infinite (except the diagonal).
pub fn all_pairs_latency(net: &SubstrateNetwork) -> Result<Vec<Vec<f64>>> {
    let n = net.num_dcs();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            if net.is_sink(DcId(s)) {
                let mut row = vec![f64::INFINITY; n];
                row[s] = 0.0;
                row
            } else {
                dijkstra(net, DcId(s)).0
            }
        })
        .collect();
    for s in net.real_dcs() {
        if net.real_dcs().any(|t| !rows[s.0][t.0].is_finite()) {
            return Err(Error::Latency("network is disconnected".into()));
        }
    }
    Ok(rows)
}

fn sink_arc_restriction(net: &SubstrateNetwork, s: DcId, a: ArcId) -> Option<f64> {
    let arc = net.arc(a);
    if net.is_sink(arc.to) || net.is_sink(arc.from) {
        // Only the source may hand flow to the sink, and nothing leaves it.
        Some(if arc.from == s { 0.0 } else { -1.0 })
    } else {
        None
    }
}

/// Restriction values keeping only shortest paths.
///
/// `R = delta(s,n) - delta(s,m) - L(m,n)`, snapped to 0 within 1e-9. Arcs of
/// zero-latency ties are kept only when they increase the (latency, hops, id)
/// label, so the admissible graph stays acyclic; the rest get -1.
pub fn restrictions_shortest_path(net: &SubstrateNetwork, delta: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..net.num_dcs())
        .into_par_iter()
        .map(|s| {
            let s = DcId(s);
            let hops = if net.is_sink(s) { vec![0; net.num_dcs()] } else { dijkstra(net, s).1 };
            (0..net.num_arcs())
                .map(|a| {
                    let a = ArcId(a);
                    if net.is_sink(s) {
                        return -1.0;
                    }
                    if let Some(r) = sink_arc_restriction(net, s, a) {
                        return r;
                    }
                    let arc = net.arc(a);
                    let (m, n) = (arc.from, arc.to);
                    let (dm, dn) = (delta[s.0][m.0], delta[s.0][n.0]);
                    let r = dn - (dm + net.link(arc.link).latency);
                    if r.abs() > snap_eps(dn) {
                        return r;
                    }
                    let key_m = (dm, hops[m.0], m.0);
                    let key_n = (dn, hops[n.0], n.0);
                    let increasing =
                        key_m.0 < key_n.0 || (key_m.0 == key_n.0 && (key_m.1, key_m.2) < (key_n.1, key_n.2));
                    if increasing {
                        0.0
                    } else {
                        -1.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Restriction values for cabdriver paths: -1 when the arc heads back
/// toward the source in either coordinate, overridden to 0 when the arc lies
/// on a shortest path, 1 otherwise.
pub fn restrictions_cabdriver(net: &SubstrateNetwork, delta: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut geo = Vec::with_capacity(net.num_dcs());
    for d in net.dc_ids() {
        match net.dc(d).geo {
            Some(p) => geo.push(p),
            None if net.is_sink(d) => geo.push((0.0, 0.0)),
            None => {
                return Err(Error::Latency(format!(
                    "DC `{}` has no coordinates; use the shortest-path restriction mode",
                    net.dc(d).name
                )))
            }
        }
    }
    Ok((0..net.num_dcs())
        .map(|s| {
            let s = DcId(s);
            (0..net.num_arcs())
                .map(|a| {
                    let a = ArcId(a);
                    if net.is_sink(s) {
                        return -1.0;
                    }
                    if let Some(r) = sink_arc_restriction(net, s, a) {
                        return r;
                    }
                    let arc = net.arc(a);
                    let (m, n) = (arc.from, arc.to);
                    let dn = delta[s.0][n.0];
                    let slack = dn - (delta[s.0][m.0] + net.link(arc.link).latency);
                    if slack.abs() <= snap_eps(dn) {
                        return 0.0;
                    }
                    let (sx, sy) = geo[s.0];
                    let (mx, my) = geo[m.0];
                    let (nx, ny) = geo[n.0];
                    if (mx - sx).abs() > (nx - sx).abs() || (my - sy).abs() > (ny - sy).abs() {
                        -1.0
                    } else {
                        1.0
                    }
                })
                .collect()
        })
        .collect())
}

/// Allowed real arcs out of every DC for source `s`, excluding arcs into `s`.
fn allowed_adjacency(net: &SubstrateNetwork, row: &[f64], s: DcId) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); net.num_dcs()];
    for (k, arc) in net.arcs().iter().enumerate() {
        if row[k] < 0.0 || arc.to == s || net.is_sink(arc.to) || net.is_sink(arc.from) {
            continue;
        }
        adj[arc.from.0].push((arc.to.0, net.link(arc.link).latency));
    }
    adj
}

/// Longest admissible path latency from `s` to every DC. The flag reports
/// whether the analytic fallback was needed.
fn source_bounds(net: &SubstrateNetwork, row: &[f64], s: DcId) -> (Vec<Option<f64>>, bool) {
    let n = net.num_dcs();
    let mut out = vec![None; n];
    if net.is_sink(s) {
        out[s.0] = Some(0.0);
        return (out, false);
    }
    let adj = allowed_adjacency(net, row, s);
    let mut reach = vec![false; n];
    let mut stack = vec![s.0];
    reach[s.0] = true;
    while let Some(v) = stack.pop() {
        for &(w, _) in &adj[v] {
            if !reach[w] {
                reach[w] = true;
                stack.push(w);
            }
        }
    }

    let mut analytic = false;
    if let Some(order) = topo_order(&adj, &reach) {
        let mut best = vec![f64::NEG_INFINITY; n];
        best[s.0] = 0.0;
        for v in order {
            if best[v] == f64::NEG_INFINITY {
                continue;
            }
            for &(w, l) in &adj[v] {
                best[w] = best[w].max(best[v] + l);
            }
        }
        for v in 0..n {
            if reach[v] {
                out[v] = Some(best[v]);
            }
        }
    } else if let Some(best) = exhaustive_longest(&adj, s.0, SEARCH_BUDGET) {
        for v in 0..n {
            if reach[v] {
                out[v] = Some(best[v]);
            }
        }
    } else {
        analytic = true;
        let k = reach.iter().filter(|&&r| r).count();
        let mut lats: Vec<f64> = (0..n).filter(|&v| reach[v]).flat_map(|v| adj[v].iter().map(|&(_, l)| l)).collect();
        lats.sort_by(|a, b| b.total_cmp(a));
        let bound: f64 = lats.iter().take(k.saturating_sub(1)).sum();
        for v in 0..n {
            if reach[v] {
                out[v] = Some(if v == s.0 { 0.0 } else { bound });
            }
        }
    }
    if let Some(sink) = net.sink() {
        out[sink.0] = Some(0.0);
    }
    (out, analytic)
}

fn topo_order(adj: &[Vec<(usize, f64)>], reach: &[bool]) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut indeg = vec![0usize; n];
    for v in 0..n {
        if reach[v] {
            for &(w, _) in &adj[v] {
                indeg[w] += 1;
            }
        }
    }
    let mut queue: Vec<usize> = (0..n).filter(|&v| reach[v] && indeg[v] == 0).collect();
    let mut order = Vec::new();
    while let Some(v) = queue.pop() {
        order.push(v);
        for &(w, _) in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push(w);
            }
        }
    }
    (order.len() == reach.iter().filter(|&&r| r).count()).then_some(order)
}

/// Max latency over all simple paths from `s`, or `None` past the budget.
fn exhaustive_longest(adj: &[Vec<(usize, f64)>], s: usize, budget: usize) -> Option<Vec<f64>> {
    fn go(
        adj: &[Vec<(usize, f64)>],
        v: usize,
        lat: f64,
        on_path: &mut [bool],
        best: &mut [f64],
        steps: &mut usize,
    ) -> bool {
        for &(w, l) in &adj[v] {
            if on_path[w] {
                continue;
            }
            if *steps == 0 {
                return false;
            }
            *steps -= 1;
            best[w] = best[w].max(lat + l);
            on_path[w] = true;
            let ok = go(adj, w, lat + l, on_path, best, steps);
            on_path[w] = false;
            if !ok {
                return false;
            }
        }
        true
    }
    let mut best = vec![f64::NEG_INFINITY; adj.len()];
    best[s] = 0.0;
    let mut on_path = vec![false; adj.len()];
    on_path[s] = true;
    let mut steps = budget;
    go(adj, s, 0.0, &mut on_path, &mut best, &mut steps).then_some(best)
}

/// Longest admissible `s -> t` latency for a given restriction table.
pub fn path_latency_bound(net: &SubstrateNetwork, restriction: &[Vec<f64>], s: DcId, t: DcId) -> Option<f64> {
    source_bounds(net, &restriction[s.0], s).0[t.0]
}
