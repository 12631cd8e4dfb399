use std::collections::BTreeMap;

use super::index::{ArcSlot, FlowIndex, FlowKey, FlowKind};
use super::{cancel_transient_cycles, unit_cost, FlowSolution, PlanStats};
use crate::error::{Error, Result};
use crate::latency::LatencyTables;
use crate::lp::{LinearModel, Relation, Simplex, SolveOptions, Status, VarId};
use crate::model::{Aggregate, AppId, Application, DcId, LinkId, LogicalLinkId, SubstrateNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Row {
    Demand(AppId, DcId),
    Transient(AppId, LogicalLinkId, DcId, DcId),
    Linkage(AppId, LogicalLinkId, DcId),
    DcCap(DcId),
    LinkCap(LinkId),
}

/// The flow LP: variable `j` of `model` is `index.keys()[j]`.
#[derive(Debug, Clone)]
pub struct FlowLp {
    pub model: LinearModel,
    pub index: FlowIndex,
    pub aggregate: Aggregate,
}

pub fn build_flow_lp(
    net: &SubstrateNetwork,
    apps: &[Application],
    aggregate: &Aggregate,
    tables: &LatencyTables,
) -> Result<FlowLp> {
    let index = FlowIndex::build(net, apps, aggregate, tables)?;
    build_with_index(net, apps, aggregate, index)
}

fn rows(net: &SubstrateNetwork, apps: &[Application], index: &FlowIndex) -> BTreeMap<Row, Vec<(usize, f64)>> {
    let mut rows: BTreeMap<Row, Vec<(usize, f64)>> = BTreeMap::new();
    for c in index.commodities() {
        let app = &apps[c.app.0];
        if !app.is_root_link(c.link) {
            // Needed even without inflow: it pins the outflow to zero.
            rows.entry(Row::Linkage(c.app, c.link, c.source)).or_default();
        }
    }
    for (j, k) in index.keys().iter().enumerate() {
        let app = &apps[k.app.0];
        let tail = k.tail(net);
        let head = k.head(net);
        if tail == k.source {
            if app.is_root_link(k.link) {
                rows.entry(Row::Demand(k.app, k.source)).or_default().push((j, 1.0));
            } else {
                rows.entry(Row::Linkage(k.app, k.link, k.source)).or_default().push((j, -1.0));
            }
        } else {
            rows.entry(Row::Transient(k.app, k.link, k.source, tail)).or_default().push((j, -1.0));
        }
        match k.kind {
            FlowKind::Transient => {
                rows.entry(Row::Transient(k.app, k.link, k.source, head)).or_default().push((j, 1.0))
            }
            FlowKind::Direct if !net.is_sink(head) => {
                for &child in &app.link(k.link).children {
                    rows.entry(Row::Linkage(k.app, child, head)).or_default().push((j, 1.0));
                }
                if !app.is_terminator_link(k.link) && net.dc(head).capacity.is_finite() {
                    let xi = app.xi_node(app.link(k.link).to, head);
                    if xi != 0.0 {
                        rows.entry(Row::DcCap(head)).or_default().push((j, xi));
                    }
                }
            }
            FlowKind::Direct => {}
        }
        if let ArcSlot::Arc(a) = k.slot {
            let l = net.arc(a).link;
            let xi = app.xi_link(k.link, l);
            if xi != 0.0 && net.link(l).capacity.is_finite() {
                rows.entry(Row::LinkCap(l)).or_default().push((j, xi));
            }
        }
    }
    rows
}

pub(super) fn estimate_rows(net: &SubstrateNetwork, index: &FlowIndex) -> usize {
    // Transient rows dominate; one per (commodity, node reached).
    let mut n = 0;
    for c in index.commodities() {
        let mut heads: Vec<DcId> = index.keys()[c.range.clone()]
            .iter()
            .filter(|k| k.kind == FlowKind::Transient)
            .map(|k| k.head(net))
            .collect();
        heads.sort();
        heads.dedup();
        n += heads.len() + 1;
    }
    n + net.num_dcs() + net.num_links()
}

pub(super) fn build_with_index(
    net: &SubstrateNetwork,
    apps: &[Application],
    aggregate: &Aggregate,
    index: FlowIndex,
) -> Result<FlowLp> {
    let mut model = LinearModel::new();
    for (j, k) in index.keys().iter().enumerate() {
        model.add_var(format!("v{j}"), 0.0, f64::INFINITY, unit_cost(net, &apps[k.app.0], k))?;
    }
    for (row, coeffs) in rows(net, apps, &index) {
        let coeffs: Vec<(VarId, f64)> = coeffs.into_iter().map(|(j, c)| (VarId(j), c)).collect();
        let (name, rel, rhs) = match row {
            Row::Demand(a, s) => (format!("dem_{}_{}", a.0, s.0), Relation::Eq, aggregate[&(a, s)]),
            Row::Transient(a, e, s, v) => (format!("tr_{}_{}_{}_{}", a.0, e.0, s.0, v.0), Relation::Eq, 0.0),
            Row::Linkage(a, e, d) => (format!("lk_{}_{}_{}", a.0, e.0, d.0), Relation::Eq, 0.0),
            Row::DcCap(d) => (format!("cap_dc_{}", d.0), Relation::Le, net.dc(d).capacity),
            Row::LinkCap(l) => (format!("cap_link_{}", l.0), Relation::Le, net.link(l).capacity),
        };
        model.add_con(name, coeffs, rel, rhs)?;
    }
    Ok(FlowLp { model, index, aggregate: aggregate.clone() })
}

/// Solves the direct flow LP and post-processes it into a [`FlowSolution`].
pub fn solve_fractional(
    lp: &FlowLp,
    net: &SubstrateNetwork,
    apps: &[Application],
    opts: &SolveOptions,
) -> Result<FlowSolution> {
    let mut sx = Simplex::new(&lp.model, opts.clone());
    let res = sx.solve()?;
    match res.status {
        Status::Optimal => {}
        Status::Infeasible => {
            return Err(Error::Internal("flow LP infeasible although the rejection sink is present".into()))
        }
        Status::Unbounded => return Err(Error::Internal("flow LP unbounded with non-negative costs".into())),
        Status::IterationLimit => {
            return Err(Error::Planner(format!("flow LP hit the iteration limit after {} pivots", res.iterations)))
        }
    }
    let mut flows: BTreeMap<FlowKey, f64> = BTreeMap::new();
    for (j, &v) in res.x.iter().enumerate() {
        if v > 1e-12 {
            flows.insert(lp.index.keys()[j], v);
        }
    }
    cancel_transient_cycles(net, &mut flows);
    let stats = PlanStats {
        method: "direct".into(),
        variables: lp.model.num_vars(),
        rows: lp.model.num_cons(),
        iterations: res.iterations,
        rounds: 1,
        columns: lp.model.num_vars(),
        seconds: 0.0,
    };
    FlowSolution::from_flows(net, apps, &lp.aggregate, flows, stats)
}
