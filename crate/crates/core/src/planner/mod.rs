//! Aggregated flow LP over direct and transient flow variables.
//!
//! Small instances are solved directly; larger ones by column generation
//! over tree embeddings, whose master is equivalent to the arc formulation.
//! Either way the result is a [`FlowSolution`] expressed in flow variables.

mod audit;
mod colgen;
mod flow;
mod index;

pub use audit::{audit_flow, AuditReport};
pub use flow::{build_flow_lp, solve_fractional, FlowLp};
pub use index::{variable_bound, ArcSlot, Commodity, FlowIndex, FlowKey, FlowKind};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::LatencyTables;
use crate::lp::SolveOptions;
use crate::model::{Aggregate, AppId, Application, ArcId, DcId, FnId, LogicalLinkId, SubstrateNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMethod {
    /// Direct LP below `direct_row_limit` rows, column generation above.
    #[default]
    Auto,
    Direct,
    ColumnGeneration,
}

impl std::str::FromStr for PlanMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(PlanMethod::Auto),
            "direct" => Ok(PlanMethod::Direct),
            "colgen" | "column-generation" => Ok(PlanMethod::ColumnGeneration),
            other => Err(Error::Parse(format!("unknown plan method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlannerOptions {
    pub method: PlanMethod,
    pub direct_row_limit: usize,
    pub max_rounds: usize,
    pub lp: SolveOptions,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            method: PlanMethod::Auto,
            direct_row_limit: 1500,
            max_rounds: 2000,
            lp: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub key: FlowKey,
    pub adu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementEntry {
    pub app: AppId,
    pub function: FnId,
    pub dc: DcId,
    pub adu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkLoadEntry {
    pub app: AppId,
    pub link: LogicalLinkId,
    pub arc: ArcId,
    pub adu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandEntry {
    pub app: AppId,
    pub dc: DcId,
    pub adu: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanStats {
    pub method: String,
    pub variables: usize,
    pub rows: usize,
    pub iterations: usize,
    pub rounds: usize,
    pub columns: usize,
    pub seconds: f64,
}

/// Fractional placement and routing plan. Only positive flows are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    pub flows: Vec<FlowEntry>,
    pub placement: Vec<PlacementEntry>,
    pub link_load: Vec<LinkLoadEntry>,
    pub cost: f64,
    pub demand: Vec<DemandEntry>,
    pub sink: DcId,
    pub sink_arcs: Vec<ArcId>,
    pub stats: PlanStats,
}

impl FlowSolution {
    pub(crate) fn from_flows(
        net: &SubstrateNetwork,
        apps: &[Application],
        aggregate: &Aggregate,
        flows: BTreeMap<FlowKey, f64>,
        stats: PlanStats,
    ) -> Result<Self> {
        let sink = net.sink().ok_or_else(|| Error::Planner("the network has no rejection sink".into()))?;
        let mut placement: BTreeMap<(AppId, FnId, DcId), f64> = BTreeMap::new();
        let mut load: BTreeMap<(AppId, LogicalLinkId, ArcId), f64> = BTreeMap::new();
        let mut cost = 0.0;
        for (k, &v) in &flows {
            let app = &apps[k.app.0];
            cost += unit_cost(net, app, k) * v;
            if k.kind == FlowKind::Direct && !app.is_terminator_link(k.link) {
                *placement.entry((k.app, app.link(k.link).to, k.head(net))).or_default() += v;
            }
            if let ArcSlot::Arc(a) = k.slot {
                *load.entry((k.app, k.link, a)).or_default() += v;
            }
        }
        let mut sink_arcs: Vec<ArcId> =
            net.arcs().iter().enumerate().filter(|(_, a)| a.to == sink).map(|(k, _)| ArcId(k)).collect();
        sink_arcs.sort();
        Ok(FlowSolution {
            flows: flows.into_iter().map(|(key, adu)| FlowEntry { key, adu }).collect(),
            placement: placement
                .into_iter()
                .map(|((app, function, dc), adu)| PlacementEntry { app, function, dc, adu })
                .collect(),
            link_load: load.into_iter().map(|((app, link, arc), adu)| LinkLoadEntry { app, link, arc, adu }).collect(),
            cost,
            demand: aggregate.iter().map(|(&(app, dc), &adu)| DemandEntry { app, dc, adu }).collect(),
            sink,
            sink_arcs,
            stats,
        })
    }

    pub fn value(&self, key: &FlowKey) -> f64 {
        self.flows.binary_search_by(|e| e.key.cmp(key)).map_or(0.0, |i| self.flows[i].adu)
    }

    pub fn direct(&self) -> impl Iterator<Item = &FlowEntry> {
        self.flows.iter().filter(|e| e.key.kind == FlowKind::Direct)
    }

    pub fn transient(&self) -> impl Iterator<Item = &FlowEntry> {
        self.flows.iter().filter(|e| e.key.kind == FlowKind::Transient)
    }

    pub fn aggregate(&self) -> Aggregate {
        self.demand.iter().map(|e| ((e.app, e.dc), e.adu)).collect()
    }

    /// Cost of the plan excluding flow sent to the sink.
    pub fn deployed_cost(&self, net: &SubstrateNetwork, apps: &[Application]) -> f64 {
        self.flows
            .iter()
            .filter(|e| !matches!(e.key.slot, ArcSlot::Arc(a) if self.sink_arcs.binary_search(&a).is_ok()))
            .map(|e| unit_cost(net, &apps[e.key.app.0], &e.key) * e.adu)
            .sum()
    }
}

/// Demand the fractional plan itself sends to the sink.
pub fn fractional_rejection(flow: &FlowSolution) -> f64 {
    flow.flows
        .iter()
        .filter(|e| matches!(e.key.slot, ArcSlot::Arc(a) if flow.sink_arcs.binary_search(&a).is_ok()))
        .map(|e| e.adu)
        .sum()
}

/// Cost of one ADU on a flow variable.
pub(crate) fn unit_cost(net: &SubstrateNetwork, app: &Application, k: &FlowKey) -> f64 {
    let mut c = 0.0;
    if let ArcSlot::Arc(a) = k.slot {
        let l = net.arc(a).link;
        c += app.xi_link(k.link, l) * net.link(l).cost;
    }
    if k.kind == FlowKind::Direct {
        let head = k.head(net);
        let f = app.link(k.link).to;
        if net.is_sink(head) {
            c += app.sink_ecu_per_adu() * net.dc(head).cost;
        } else {
            c += app.xi_node(f, head) * net.dc(head).cost;
        }
    }
    c
}

/// Builds and solves the flow LP with the method selected in `opts`.
pub fn plan(
    net: &SubstrateNetwork,
    apps: &[Application],
    aggregate: &Aggregate,
    tables: &LatencyTables,
    opts: &PlannerOptions,
) -> Result<FlowSolution> {
    let start = Instant::now();
    let index = FlowIndex::build(net, apps, aggregate, tables)?;
    let method = match opts.method {
        PlanMethod::Auto if flow::estimate_rows(net, &index) <= opts.direct_row_limit => PlanMethod::Direct,
        PlanMethod::Auto => PlanMethod::ColumnGeneration,
        m => m,
    };
    let mut sol = match method {
        PlanMethod::ColumnGeneration => colgen::solve(net, apps, aggregate, tables, &index, opts)?,
        _ => {
            let lp = flow::build_with_index(net, apps, aggregate, index)?;
            solve_fractional(&lp, net, apps, &opts.lp)?
        }
    };
    sol.stats.seconds = start.elapsed().as_secs_f64();
    Ok(sol)
}

/// Removes circulations of transient flow within each commodity. They carry
/// no demand and would make rounding walks revisit a DC.
pub(crate) fn cancel_transient_cycles(net: &SubstrateNetwork, flows: &mut BTreeMap<FlowKey, f64>) -> usize {
    let mut by_commodity: BTreeMap<(AppId, LogicalLinkId, DcId), Vec<FlowKey>> = BTreeMap::new();
    for (k, &v) in flows.iter() {
        if k.kind == FlowKind::Transient && v > 0.0 {
            by_commodity.entry((k.app, k.link, k.source)).or_default().push(*k);
        }
    }
    let mut canceled = 0;
    for keys in by_commodity.values() {
        while let Some(cycle) = find_cycle(net, keys, flows) {
            let m = cycle.iter().map(|k| flows[k]).fold(f64::INFINITY, f64::min);
            for k in &cycle {
                let v = flows.get_mut(k).expect("cycle key present");
                *v -= m;
                if *v <= 1e-12 {
                    *v = 0.0;
                }
            }
            canceled += 1;
        }
    }
    flows.retain(|_, v| *v > 0.0);
    canceled
}

fn find_cycle(net: &SubstrateNetwork, keys: &[FlowKey], flows: &BTreeMap<FlowKey, f64>) -> Option<Vec<FlowKey>> {
    let mut out: BTreeMap<DcId, Vec<FlowKey>> = BTreeMap::new();
    for k in keys {
        if flows[k] > 0.0 {
            out.entry(k.tail(net)).or_default().push(*k);
        }
    }
    // 0 = unseen, 1 = on stack, 2 = done.
    let mut state: BTreeMap<DcId, u8> = BTreeMap::new();
    let starts: Vec<DcId> = out.keys().copied().collect();
    for s in starts {
        if state.get(&s).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(DcId, usize)> = vec![(s, 0)];
        let mut path: Vec<FlowKey> = Vec::new();
        state.insert(s, 1);
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            let edges = out.get(&v).map_or(&[][..], |e| &e[..]);
            if *next < edges.len() {
                let k = edges[*next];
                *next += 1;
                let w = k.head(net);
                match state.get(&w).copied().unwrap_or(0) {
                    0 => {
                        state.insert(w, 1);
                        path.push(k);
                        stack.push((w, 0));
                    }
                    1 => {
                        let pos = path.iter().position(|p| p.tail(net) == w).unwrap_or(0);
                        let mut cyc = path[pos..].to_vec();
                        cyc.push(k);
                        return Some(cyc);
                    }
                    _ => {}
                }
            } else {
                state.insert(v, 2);
                stack.pop();
                path.pop();
            }
        }
    }
    None
}
