use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::LatencyTables;
use crate::model::{Aggregate, AppId, Application, ArcId, DcId, LogicalLinkId, SubstrateNetwork};

/// Where a flow variable sits: inside the source DC or on a directed arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArcSlot {
    Intra,
    Arc(ArcId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    /// The arc ends at the DC hosting the link's target function.
    Direct,
    /// The arc ends at an intermediate DC.
    Transient,
}

/// One flow variable: logical link `link` of `app`, for traffic whose link
/// starts at `source`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub app: AppId,
    pub link: LogicalLinkId,
    pub source: DcId,
    pub slot: ArcSlot,
    pub kind: FlowKind,
}

impl FlowKey {
    /// DC the flow arrives at (the source for intra-DC flow).
    pub fn head(&self, net: &SubstrateNetwork) -> DcId {
        match self.slot {
            ArcSlot::Intra => self.source,
            ArcSlot::Arc(a) => net.arc(a).to,
        }
    }

    pub fn tail(&self, net: &SubstrateNetwork) -> DcId {
        match self.slot {
            ArcSlot::Intra => self.source,
            ArcSlot::Arc(a) => net.arc(a).from,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commodity {
    pub app: AppId,
    pub link: LogicalLinkId,
    pub source: DcId,
    pub range: Range<usize>,
}

/// Admissible region of one commodity.
#[derive(Debug, Clone)]
pub(crate) struct Space {
    /// Reachable from the source over allowed arcs.
    pub reach: Vec<bool>,
    /// Latency-feasible endpoints (includes the source).
    pub target: Vec<bool>,
    /// Nodes from which some endpoint other than the source can be reached.
    pub useful: Vec<bool>,
}

fn latency_ok(bound: Option<f64>, limit: f64) -> bool {
    bound.is_some_and(|b| limit == f64::INFINITY || b <= limit + 1e-9 * limit.abs().max(1.0))
}

/// Usable arc for source `s`: allowed, between real DCs and not entering `s`.
pub(crate) fn usable(net: &SubstrateNetwork, tables: &LatencyTables, s: DcId, a: ArcId) -> bool {
    let arc = net.arc(a);
    tables.allowed(s, a) && arc.to != s && !net.is_sink(arc.to) && !net.is_sink(arc.from)
}

pub(crate) fn space(net: &SubstrateNetwork, tables: &LatencyTables, s: DcId, limit: f64) -> Space {
    let n = net.num_dcs();
    let mut reach = vec![false; n];
    reach[s.0] = true;
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for &a in net.out_arcs(v) {
            if usable(net, tables, s, a) {
                let w = net.arc(a).to;
                if !reach[w.0] {
                    reach[w.0] = true;
                    stack.push(w);
                }
            }
        }
    }
    let target: Vec<bool> =
        (0..n).map(|t| reach[t] && !net.is_sink(DcId(t)) && latency_ok(tables.path_bound(s, DcId(t)), limit)).collect();
    // Backward closure from arcs entering a non-source endpoint.
    let mut useful = vec![false; n];
    let mut rev: Vec<Vec<DcId>> = vec![Vec::new(); n];
    let mut queue = Vec::new();
    for (k, arc) in net.arcs().iter().enumerate() {
        if !reach[arc.from.0] || !usable(net, tables, s, ArcId(k)) {
            continue;
        }
        rev[arc.to.0].push(arc.from);
        if target[arc.to.0] && !useful[arc.from.0] {
            useful[arc.from.0] = true;
            queue.push(arc.from);
        }
    }
    while let Some(v) = queue.pop() {
        for &u in &rev[v.0] {
            if !useful[u.0] {
                useful[u.0] = true;
                queue.push(u);
            }
        }
    }
    Space { reach, target, useful }
}

/// The flow variables of the aggregated LP, sorted by key. Structurally
/// zero variables (restricted arcs, loops back to the source, latency-
/// infeasible endpoints, non-intra terminator links) are never created.
#[derive(Debug, Clone, Default)]
pub struct FlowIndex {
    keys: Vec<FlowKey>,
    lookup: HashMap<FlowKey, usize>,
    commodities: Vec<Commodity>,
}

impl FlowIndex {
    pub fn build(
        net: &SubstrateNetwork,
        apps: &[Application],
        aggregate: &Aggregate,
        tables: &LatencyTables,
    ) -> Result<Self> {
        let Some(sink) = net.sink() else {
            return Err(Error::Planner("the network has no rejection sink; add it first".into()));
        };
        if tables.num_dcs() != net.num_dcs() {
            return Err(Error::Planner("latency tables were computed for a different network".into()));
        }
        let mut keys = Vec::new();
        let mut commodities = Vec::new();
        for (ai, app) in apps.iter().enumerate() {
            let a = AppId(ai);
            for e in app.link_ids() {
                let root = app.is_root_link(e);
                let term = app.is_terminator_link(e);
                let limit = app.link(e).latency_bound;
                for s in net.real_dcs() {
                    if root && aggregate.get(&(a, s)).copied().unwrap_or(0.0) <= 0.0 {
                        continue;
                    }
                    let start = keys.len();
                    let mut push = |slot, kind| keys.push(FlowKey { app: a, link: e, source: s, slot, kind });
                    push(ArcSlot::Intra, FlowKind::Direct);
                    if !term {
                        let sp = space(net, tables, s, limit);
                        for (k, arc) in net.arcs().iter().enumerate() {
                            let id = ArcId(k);
                            if root && arc.from == s && arc.to == sink {
                                push(ArcSlot::Arc(id), FlowKind::Direct);
                                continue;
                            }
                            if !sp.reach[arc.from.0] || !usable(net, tables, s, id) {
                                continue;
                            }
                            if arc.from != s && !sp.useful[arc.from.0] {
                                continue;
                            }
                            if sp.target[arc.to.0] {
                                push(ArcSlot::Arc(id), FlowKind::Direct);
                            }
                            if sp.useful[arc.to.0] {
                                push(ArcSlot::Arc(id), FlowKind::Transient);
                            }
                        }
                    }
                    keys[start..].sort();
                    commodities.push(Commodity { app: a, link: e, source: s, range: start..keys.len() });
                }
            }
        }
        let lookup = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let index = FlowIndex { keys, lookup, commodities };
        let bound = variable_bound(net, apps);
        if index.len() > bound {
            return Err(Error::Internal(format!("{} flow variables exceed the bound {bound}", index.len())));
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[FlowKey] {
        &self.keys
    }

    pub fn get(&self, key: &FlowKey) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    pub fn contains(&self, key: &FlowKey) -> bool {
        self.lookup.contains_key(key)
    }

    pub fn commodities(&self) -> &[Commodity] {
        &self.commodities
    }
}

/// `2 |D| |arcs| sum_a |E^a|`, with the sink counted in `D` and its links in `arcs`.
pub fn variable_bound(net: &SubstrateNetwork, apps: &[Application]) -> usize {
    let links: usize = apps.iter().map(Application::num_links).sum();
    2 * net.num_dcs() * net.num_arcs() * links
}
