use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use super::index::{space, usable, ArcSlot, FlowIndex, FlowKey, FlowKind};
use super::{cancel_transient_cycles, FlowSolution, PlanStats, PlannerOptions};
use crate::error::{Error, Result};
use crate::latency::LatencyTables;
use crate::lp::{LinearModel, Relation, Simplex, Status};
use crate::model::{Aggregate, AppId, Application, ArcId, DcId, FnId, LinkId, LogicalLinkId, SubstrateNetwork, ROOT};

/// One tree embedding of an application rooted at a user DC.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Column {
    app: AppId,
    source: DcId,
    /// None routes the whole demand to the sink.
    placement: Option<Vec<DcId>>,
    paths: Vec<Vec<ArcId>>,
}

struct Rows {
    demand: BTreeMap<(AppId, DcId), usize>,
    dc: Vec<Option<usize>>,
    link: Vec<Option<usize>>,
}

/// Per-application data that does not change between pricing rounds.
struct AppSpace {
    /// `targets[e][v]`: latency-feasible endpoints for link `e` leaving `v`.
    targets: Vec<Vec<Vec<bool>>>,
}

fn column_coeffs(net: &SubstrateNetwork, app: &Application, col: &Column, rows: &Rows) -> (f64, Vec<(usize, f64)>) {
    let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
    coeffs.insert(rows.demand[&(col.app, col.source)], 1.0);
    let Some(place) = &col.placement else {
        let sink = net.sink().expect("sink present");
        return (app.sink_ecu_per_adu() * net.dc(sink).cost, coeffs.into_iter().collect());
    };
    let mut cost = 0.0;
    for f in app.vnfs() {
        let d = place[f.0];
        let xi = app.xi_node(f, d);
        cost += xi * net.dc(d).cost;
        if let Some(r) = rows.dc[d.0] {
            if xi != 0.0 {
                *coeffs.entry(r).or_default() += xi;
            }
        }
    }
    for e in app.link_ids() {
        for &a in &col.paths[e.0] {
            let l = net.arc(a).link;
            let xi = app.xi_link(e, l);
            cost += xi * net.link(l).cost;
            if let Some(r) = rows.link[l.0] {
                if xi != 0.0 {
                    *coeffs.entry(r).or_default() += xi;
                }
            }
        }
    }
    (cost, coeffs.into_iter().collect())
}

struct Pricing<'a> {
    net: &'a SubstrateNetwork,
    /// Usable arcs out of each DC, per source.
    adj: Vec<Vec<Vec<ArcId>>>,
}

impl Pricing<'_> {
    /// Shortest paths from `s` under `weight`, restricted to arcs usable for source `s`.
    fn dijkstra(&self, s: DcId, weight: impl Fn(LinkId) -> f64) -> (Vec<f64>, Vec<Option<ArcId>>) {
        let n = self.net.num_dcs();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        dist[s.0] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((OrdF(0.0), s.0)));
        while let Some(Reverse((OrdF(d), v))) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            for &a in &self.adj[s.0][v] {
                let arc = self.net.arc(a);
                let nd = d + weight(arc.link);
                if nd < dist[arc.to.0] {
                    dist[arc.to.0] = nd;
                    pred[arc.to.0] = Some(a);
                    heap.push(Reverse((OrdF(nd), arc.to.0)));
                }
            }
        }
        (dist, pred)
    }

    /// Best embedding per source for one application under node prices
    /// `np[d]` and link prices `lp[l]`. Returns (reduced-cost part, column).
    fn price_app(
        &self,
        a: AppId,
        app: &Application,
        space: &AppSpace,
        sources: &[DcId],
        np: &[f64],
        lp: &[f64],
    ) -> Vec<(DcId, f64, Column)> {
        let n = self.net.num_dcs();
        let nf = app.functions().len();
        let nl = app.num_links();
        // g[f][v]: cost of the subtree rooted at f placed on v.
        let mut g = vec![vec![f64::INFINITY; n]; nf];
        // h[e][v]: cost of link e leaving v plus the subtree below; choice per (e, v).
        let mut h = vec![vec![f64::INFINITY; n]; nl];
        let mut choice: Vec<Vec<Option<(DcId, Vec<ArcId>)>>> = vec![vec![None; n]; nl];
        for e in (0..nl).rev().map(LogicalLinkId) {
            let link = app.link(e);
            let j = link.to;
            if app.is_terminator_link(e) {
                for v in self.net.real_dcs() {
                    h[e.0][v.0] = 0.0;
                    choice[e.0][v.0] = Some((v, Vec::new()));
                }
                continue;
            }
            // Subtree cost of the target function.
            for t in self.net.real_dcs() {
                let mut c = app.xi_node(j, t) * np[t.0];
                for &child in &link.children {
                    c += h[child.0][t.0];
                }
                g[j.0][t.0] = c;
            }
            let froms: Vec<DcId> = if app.is_root_link(e) { sources.to_vec() } else { self.net.real_dcs().collect() };
            for v in froms {
                let (dist, pred) = self.dijkstra(v, |l| app.xi_link(e, l) * lp[l.0]);
                let tg = &space.targets[e.0][v.0];
                let mut best = (g[j.0][v.0], v);
                for t in self.net.real_dcs() {
                    if t != v && tg[t.0] && dist[t.0].is_finite() {
                        let c = dist[t.0] + g[j.0][t.0];
                        if c < best.0 {
                            best = (c, t);
                        }
                    }
                }
                if best.0.is_finite() {
                    let mut path = Vec::new();
                    let mut w = best.1;
                    while w != v {
                        let arc = pred[w.0].expect("reachable");
                        path.push(arc);
                        w = self.net.arc(arc).from;
                    }
                    path.reverse();
                    h[e.0][v.0] = best.0;
                    choice[e.0][v.0] = Some((best.1, path));
                }
            }
        }
        let root = app.out_links(ROOT).next().expect("root link");
        let mut out = Vec::new();
        for &s in sources {
            if !h[root.0][s.0].is_finite() {
                continue;
            }
            let mut placement = vec![s; nf];
            let mut paths = vec![Vec::new(); nl];
            let mut stack = vec![(root, s)];
            while let Some((e, v)) = stack.pop() {
                let (t, path) = choice[e.0][v.0].clone().expect("priced");
                placement[app.link(e).to.0] = t;
                paths[e.0] = path;
                for c in app.out_links(app.link(e).to) {
                    stack.push((c, t));
                }
            }
            out.push((s, h[root.0][s.0], Column { app: a, source: s, placement: Some(placement), paths }));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF(f64);

impl Eq for OrdF {}

impl PartialOrd for OrdF {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Dantzig-Wolfe decomposition: the master holds demand and capacity rows;
/// pricing is a shortest-path dynamic program over the application tree.
pub(super) fn solve(
    net: &SubstrateNetwork,
    apps: &[Application],
    aggregate: &Aggregate,
    tables: &LatencyTables,
    index: &FlowIndex,
    opts: &PlannerOptions,
) -> Result<FlowSolution> {
    let n = net.num_dcs();
    let mut model = LinearModel::new();
    let mut rows = Rows { demand: BTreeMap::new(), dc: vec![None; n], link: vec![None; net.num_links()] };
    for (&(a, s), &v) in aggregate {
        if v > 0.0 {
            let c = model.add_con(format!("dem_{}_{}", a.0, s.0), vec![], Relation::Eq, v)?;
            rows.demand.insert((a, s), c.0);
        }
    }
    for d in net.real_dcs() {
        if net.dc(d).capacity.is_finite() {
            rows.dc[d.0] = Some(model.add_con(format!("cap_dc_{}", d.0), vec![], Relation::Le, net.dc(d).capacity)?.0);
        }
    }
    for (k, l) in net.links().iter().enumerate() {
        if l.capacity.is_finite() && !net.is_sink_link(LinkId(k)) {
            rows.link[k] = Some(model.add_con(format!("cap_link_{k}"), vec![], Relation::Le, l.capacity)?.0);
        }
    }

    let mut sx = Simplex::new(&model, opts.lp.clone());
    let mut columns: Vec<Column> = Vec::new();
    let mut seen: HashSet<Column> = HashSet::new();
    for &(a, s) in rows.demand.keys() {
        let col = Column { app: a, source: s, placement: None, paths: Vec::new() };
        let (cost, coeffs) = column_coeffs(net, &apps[a.0], &col, &rows);
        sx.add_column(cost, 0.0, f64::INFINITY, &coeffs);
        seen.insert(col.clone());
        columns.push(col);
    }

    let adj: Vec<Vec<Vec<ArcId>>> = (0..n)
        .map(|s| {
            (0..n)
                .map(|v| net.out_arcs(DcId(v)).iter().copied().filter(|&a| usable(net, tables, DcId(s), a)).collect())
                .collect()
        })
        .collect();
    let pricing = Pricing { net, adj };
    let spaces: Vec<AppSpace> = apps
        .iter()
        .map(|app| AppSpace {
            targets: app
                .link_ids()
                .map(|e| (0..n).map(|v| space(net, tables, DcId(v), app.link(e).latency_bound).target).collect())
                .collect(),
        })
        .collect();
    let sources: Vec<Vec<DcId>> =
        (0..apps.len()).map(|a| rows.demand.keys().filter(|k| k.0 .0 == a).map(|k| k.1).collect()).collect();

    let mut res = sx.solve()?;
    let mut rounds = 0;
    loop {
        if res.status != Status::Optimal {
            return Err(Error::Planner(format!("column generation master ended with status {:?}", res.status)));
        }
        if rounds >= opts.max_rounds {
            return Err(Error::Planner(format!("column generation did not converge in {rounds} rounds")));
        }
        rounds += 1;
        let mut np = vec![0.0; n];
        let mut lp = vec![0.0; net.num_links()];
        for d in 0..n {
            np[d] = net.dc(DcId(d)).cost - rows.dc[d].map_or(0.0, |r| res.duals[r].min(0.0));
        }
        for (l, row) in rows.link.iter().enumerate() {
            lp[l] = net.link(LinkId(l)).cost - row.map_or(0.0, |r| res.duals[r].min(0.0));
        }
        let mut added = 0;
        for (ai, app) in apps.iter().enumerate() {
            if sources[ai].is_empty() {
                continue;
            }
            for (s, value, col) in pricing.price_app(AppId(ai), app, &spaces[ai], &sources[ai], &np, &lp) {
                let pi = res.duals[rows.demand[&(AppId(ai), s)]];
                if value - pi < -1e-10 * pi.abs().max(1.0) && seen.insert(col.clone()) {
                    let (cost, coeffs) = column_coeffs(net, app, &col, &rows);
                    sx.add_column(cost, 0.0, f64::INFINITY, &coeffs);
                    columns.push(col);
                    added += 1;
                }
            }
        }
        if added == 0 {
            break;
        }
        res = sx.resolve()?;
    }

    let mut flows: BTreeMap<FlowKey, f64> = BTreeMap::new();
    for (col, &y) in columns.iter().zip(&res.x) {
        if y <= 1e-12 {
            continue;
        }
        expand(net, &apps[col.app.0], col, y, &mut flows);
    }
    for k in flows.keys() {
        if !index.contains(k) {
            return Err(Error::Internal(format!("column generation produced a variable outside the index: {k:?}")));
        }
    }
    cancel_transient_cycles(net, &mut flows);
    let stats = PlanStats {
        method: "colgen".into(),
        variables: index.len(),
        rows: sx.num_rows(),
        iterations: sx.iterations(),
        rounds,
        columns: columns.len(),
        seconds: 0.0,
    };
    FlowSolution::from_flows(net, apps, aggregate, flows, stats)
}

fn expand(net: &SubstrateNetwork, app: &Application, col: &Column, y: f64, flows: &mut BTreeMap<FlowKey, f64>) {
    let root = app.out_links(ROOT).next().expect("root link");
    let Some(place) = &col.placement else {
        let sink = net.sink().expect("sink present");
        let arc = net.arc_between(col.source, sink).expect("sink arc");
        let key =
            FlowKey { app: col.app, link: root, source: col.source, slot: ArcSlot::Arc(arc), kind: FlowKind::Direct };
        *flows.entry(key).or_default() += y;
        return;
    };
    for e in app.link_ids() {
        let link = app.link(e);
        let source = if link.from == FnId(0) { col.source } else { place[link.from.0] };
        let path = &col.paths[e.0];
        let base = FlowKey { app: col.app, link: e, source, slot: ArcSlot::Intra, kind: FlowKind::Direct };
        if path.is_empty() {
            *flows.entry(base).or_default() += y;
            continue;
        }
        for (i, &a) in path.iter().enumerate() {
            let kind = if i + 1 == path.len() { FlowKind::Direct } else { FlowKind::Transient };
            *flows.entry(FlowKey { slot: ArcSlot::Arc(a), kind, ..base }).or_default() += y;
        }
    }
}
