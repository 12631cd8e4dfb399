use std::collections::{BTreeMap, BTreeSet};

use super::{ArcSlot, FlowKind, FlowSolution};
use crate::latency::LatencyTables;
use crate::model::{
    Aggregate, AppId, Application, ArcId, DcId, FnId, FunctionKind, LinkId, LogicalLinkId, SubstrateNetwork,
};

/// Outcome of re-checking a plan against the flow LP constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub violations: Vec<String>,
    /// Largest absolute residual seen, scaled by the row magnitude.
    pub max_residual: f64,
}

impl AuditReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Checker {
    tol: f64,
    report: AuditReport,
}

impl Checker {
    /// Records `lhs - rhs` against a tolerance scaled by `scale`.
    fn eq(&mut self, what: impl FnOnce() -> String, lhs: f64, rhs: f64, scale: f64) {
        let r = (lhs - rhs).abs() / scale.max(1.0);
        self.report.max_residual = self.report.max_residual.max(r);
        if r > self.tol {
            self.report.violations.push(format!("{}: {lhs} != {rhs}", what()));
        }
    }

    fn le(&mut self, what: impl FnOnce() -> String, lhs: f64, rhs: f64) {
        let r = (lhs - rhs).max(0.0) / rhs.abs().max(1.0);
        self.report.max_residual = self.report.max_residual.max(r);
        if r > self.tol {
            self.report.violations.push(format!("{}: {lhs} > {rhs}", what()));
        }
    }

    fn fail(&mut self, msg: String) {
        self.report.violations.push(msg);
    }
}

/// Checks every flow LP constraint on `flow` from the raw flow entries.
/// Residuals are relative to `max(1, row magnitude)`.
pub fn audit_flow(
    net: &SubstrateNetwork,
    apps: &[Application],
    aggregate: &Aggregate,
    tables: &LatencyTables,
    flow: &FlowSolution,
    tol: f64,
) -> AuditReport {
    let mut ck = Checker { tol, report: AuditReport::default() };
    let Some(sink) = net.sink() else {
        ck.fail("network has no sink".into());
        return ck.report;
    };
    let n = net.num_dcs();

    // out[(a, e, s, v)]: flow leaving v; tin[(a, e, s, v)]: transient flow entering v.
    let mut out: BTreeMap<(AppId, LogicalLinkId, DcId, DcId), f64> = BTreeMap::new();
    let mut tin: BTreeMap<(AppId, LogicalLinkId, DcId, DcId), f64> = BTreeMap::new();
    // din[(a, e, d)]: direct flow of e arriving at d, any source.
    let mut din: BTreeMap<(AppId, LogicalLinkId, DcId), f64> = BTreeMap::new();
    let mut place: BTreeMap<(AppId, FnId, DcId), f64> = BTreeMap::new();
    let mut load: BTreeMap<(AppId, LogicalLinkId, ArcId), f64> = BTreeMap::new();
    let mut cost = 0.0;

    for entry in &flow.flows {
        let k = entry.key;
        let v = entry.adu;
        if k.app.0 >= apps.len() {
            ck.fail(format!("unknown application {:?}", k.app));
            continue;
        }
        let app = &apps[k.app.0];
        if k.link.0 >= app.links().len() || k.source.0 >= n {
            ck.fail(format!("malformed key {k:?}"));
            continue;
        }
        if v < -1e-6 {
            ck.fail(format!("negative flow {v} on {k:?}"));
        }
        let link = app.link(k.link);
        let to_terminator = app.function(link.to).kind == FunctionKind::Terminator;
        let root = link.from == FnId(0);
        if net.is_sink(k.source) {
            ck.fail(format!("flow sourced at the sink: {k:?}"));
        }
        let (tail, head) = match k.slot {
            ArcSlot::Intra => {
                if k.kind == FlowKind::Transient {
                    ck.fail(format!("intra-DC transient flow {k:?}"));
                }
                (k.source, k.source)
            }
            ArcSlot::Arc(a) => {
                if a.0 >= net.num_arcs() {
                    ck.fail(format!("unknown arc in {k:?}"));
                    continue;
                }
                let arc = net.arc(a);
                if to_terminator {
                    ck.fail(format!("terminator link leaves the DC: {k:?}"));
                }
                if arc.to == k.source {
                    ck.fail(format!("flow loops back to its source: {k:?}"));
                }
                if arc.to == sink {
                    if !(root && k.kind == FlowKind::Direct && arc.from == k.source) {
                        ck.fail(format!("illegal use of the sink: {k:?}"));
                    }
                } else if arc.from == sink {
                    ck.fail(format!("flow leaves the sink: {k:?}"));
                } else {
                    if tables.restriction(k.source, a) < 0.0 {
                        ck.fail(format!("flow on a restricted arc: {k:?}"));
                    }
                    if k.kind == FlowKind::Direct {
                        let ok = match tables.path_bound(k.source, arc.to) {
                            None => false,
                            Some(b) => {
                                link.latency_bound.is_infinite()
                                    || b <= link.latency_bound + 1e-9 * link.latency_bound.abs().max(1.0)
                            }
                        };
                        if !ok {
                            ck.fail(format!("direct flow into a latency-infeasible DC: {k:?}"));
                        }
                    }
                }
                let l = arc.link;
                *load.entry((k.app, k.link, a)).or_default() += v;
                cost += v * app.xi_link(k.link, l) * net.link(l).cost;
                (arc.from, arc.to)
            }
        };
        *out.entry((k.app, k.link, k.source, tail)).or_default() += v;
        match k.kind {
            FlowKind::Transient => *tin.entry((k.app, k.link, k.source, head)).or_default() += v,
            FlowKind::Direct => {
                *din.entry((k.app, k.link, head)).or_default() += v;
                if head == sink {
                    cost += v * app.sink_ecu_per_adu() * net.dc(sink).cost;
                } else if !to_terminator {
                    *place.entry((k.app, link.to, head)).or_default() += v;
                    cost += v * app.xi_node(link.to, head) * net.dc(head).cost;
                }
            }
        }
    }

    // Demand: everything entering at s leaves s on the first link.
    let mut keys: BTreeSet<(AppId, DcId)> = aggregate.keys().copied().collect();
    for &(a, e, s, v) in out.keys() {
        if s == v && apps[a.0].link(e).from == FnId(0) {
            keys.insert((a, s));
        }
    }
    for (a, s) in keys {
        let Some(root) = apps[a.0].links().iter().position(|l| l.from == FnId(0)) else { continue };
        let want = aggregate.get(&(a, s)).copied().unwrap_or(0.0);
        let got = out.get(&(a, LogicalLinkId(root), s, s)).copied().unwrap_or(0.0);
        ck.eq(|| format!("demand of app {} at DC {}", a.0, s.0), got, want, want);
    }

    // Transient conservation at every non-source DC.
    let mut nodes: BTreeSet<(AppId, LogicalLinkId, DcId, DcId)> = tin.keys().copied().collect();
    nodes.extend(out.keys().copied().filter(|k| k.2 != k.3));
    for key in nodes {
        let i = tin.get(&key).copied().unwrap_or(0.0);
        let o = out.get(&key).copied().unwrap_or(0.0);
        ck.eq(|| format!("transient conservation {key:?}"), i, o, i.max(o));
    }

    // Linkage between consecutive logical links at real DCs.
    for (ai, app) in apps.iter().enumerate() {
        let a = AppId(ai);
        for (ei, link) in app.links().iter().enumerate() {
            if link.from == FnId(0) {
                continue;
            }
            let Some(parent) = app.links().iter().position(|p| p.to == link.from) else {
                ck.fail(format!("app {ai} link {ei} has no parent"));
                continue;
            };
            for d in 0..n {
                let d = DcId(d);
                if d == sink {
                    continue;
                }
                let i = din.get(&(a, LogicalLinkId(parent), d)).copied().unwrap_or(0.0);
                let o = out.get(&(a, LogicalLinkId(ei), d, d)).copied().unwrap_or(0.0);
                ck.eq(|| format!("linkage app {ai} link {ei} at DC {}", d.0), i, o, i.max(o));
            }
        }
    }

    // Aggregates agree with the stored tables and respect capacities.
    let stored_place: BTreeMap<(AppId, FnId, DcId), f64> =
        flow.placement.iter().map(|p| ((p.app, p.function, p.dc), p.adu)).collect();
    for k in place.keys().chain(stored_place.keys()).collect::<BTreeSet<_>>() {
        if k.2 == sink {
            continue;
        }
        let mine = place.get(k).copied().unwrap_or(0.0);
        let theirs = stored_place.get(k).copied().unwrap_or(0.0);
        ck.eq(|| format!("placement {k:?}"), theirs, mine, mine);
    }
    let stored_load: BTreeMap<(AppId, LogicalLinkId, ArcId), f64> =
        flow.link_load.iter().map(|p| ((p.app, p.link, p.arc), p.adu)).collect();
    for k in load.keys().chain(stored_load.keys()).collect::<BTreeSet<_>>() {
        let mine = load.get(k).copied().unwrap_or(0.0);
        let theirs = stored_load.get(k).copied().unwrap_or(0.0);
        ck.eq(|| format!("link load {k:?}"), theirs, mine, mine);
    }
    let mut ecu = vec![0.0; n];
    for (&(a, f, d), &v) in &place {
        ecu[d.0] += apps[a.0].xi_node(f, d) * v;
    }
    for (d, &used) in ecu.iter().enumerate() {
        let cap = net.dc(DcId(d)).capacity;
        if DcId(d) != sink && cap.is_finite() {
            ck.le(|| format!("capacity of DC {d}"), used, cap);
        }
    }
    let mut bwu = vec![0.0; net.num_links()];
    for (&(a, e, arc), &v) in &load {
        let l = net.arc(arc).link;
        bwu[l.0] += apps[a.0].xi_link(e, l) * v;
    }
    for (l, &used) in bwu.iter().enumerate() {
        let cap = net.link(LinkId(l)).capacity;
        if cap.is_finite() {
            ck.le(|| format!("capacity of link {l}"), used, cap);
        }
    }
    ck.eq(|| "plan cost".into(), flow.cost, cost, cost);
    ck.report
}
