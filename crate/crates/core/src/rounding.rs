//! Per-user greedy allocation over the fractional plan.
//!
//! Each user walks the residual plan from its entry DC, one logical link at
//! a time in BFS order, and either takes its demand out of the walked flows
//! or is rejected after the walked flows are reduced by what was available.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AppId, Application, ArcId, DcId, DemandSet, Deployment, LogicalLinkId, SubstrateNetwork, User, UserEmbedding, ROOT,
};
use crate::planner::{ArcSlot, FlowKind, FlowSolution};

/// Residual flows below this are treated as zero.
pub const CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
struct Node {
    /// (destination, flow index), sorted by destination.
    transient: Vec<(DcId, usize)>,
    direct: Vec<(DcId, usize)>,
    /// Entries before the cursor are exhausted for good.
    t_cursor: usize,
    d_cursor: usize,
}

/// Mutable copy of a plan's flows, indexed for walks.
#[derive(Debug, Clone)]
pub struct ResidualPlan {
    values: Vec<f64>,
    slots: Vec<ArcSlot>,
    sink_flow: Vec<bool>,
    /// Non-empty nodes; `node_of[commodity * num_dcs + v]` indexes them,
    /// `u32::MAX` when empty.
    nodes: Vec<Node>,
    node_of: Vec<u32>,
    /// `offsets[a][e]`: first commodity id of (a, e); sources are dense after it.
    offsets: Vec<Vec<usize>>,
    num_dcs: usize,
}

impl ResidualPlan {
    pub fn new(net: &SubstrateNetwork, apps: &[Application], plan: &FlowSolution) -> Self {
        let n = net.num_dcs();
        let mut offsets: Vec<Vec<usize>> = Vec::with_capacity(apps.len());
        let mut next = 0;
        for app in apps {
            offsets.push((0..app.num_links()).map(|e| next + e * n).collect());
            next += app.num_links() * n;
        }
        let mut nodes: Vec<Node> = Vec::new();
        let mut node_of = vec![u32::MAX; next * n];
        let mut values = Vec::with_capacity(plan.flows.len());
        let mut slots = Vec::with_capacity(plan.flows.len());
        let mut sink_flow = Vec::with_capacity(plan.flows.len());
        for (i, entry) in plan.flows.iter().enumerate() {
            let k = entry.key;
            values.push(entry.adu.max(0.0));
            slots.push(k.slot);
            let head = k.head(net);
            sink_flow.push(net.is_sink(head));
            let c: usize = offsets[k.app.0][k.link.0] + k.source.0;
            let slot = &mut node_of[c * n + k.tail(net).0];
            if *slot == u32::MAX {
                *slot = nodes.len() as u32;
                nodes.push(Node::default());
            }
            let node = &mut nodes[*slot as usize];
            match k.kind {
                FlowKind::Transient => node.transient.push((head, i)),
                FlowKind::Direct => node.direct.push((head, i)),
            }
        }
        for node in &mut nodes {
            node.transient.sort();
            node.direct.sort();
        }
        ResidualPlan { values, slots, sink_flow, nodes, node_of, offsets, num_dcs: n }
    }

    /// Current residual of flow entry `i` (same order as the plan's flows).
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn first_positive(values: &[f64], list: &[(DcId, usize)], cursor: &mut usize) -> Option<(DcId, usize)> {
        while *cursor < list.len() && values[list[*cursor].1] <= CLAMP {
            *cursor += 1;
        }
        list.get(*cursor).copied()
    }
}

/// Result of walking one logical link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkWalk {
    /// Flow entries used, the last one direct.
    pub entries: Vec<usize>,
    pub path: Vec<ArcId>,
    pub destination: DcId,
    /// Smallest residual along the walk; infinite on a sink arc.
    pub lambda: f64,
}

/// Follows positive transient flow of `e` from `s` (lowest destination
/// first) and ends on the first positive direct flow. None when the walk
/// finds no positive direct flow.
pub fn embed_link_from_dc(
    net: &SubstrateNetwork,
    app: AppId,
    e: LogicalLinkId,
    s: DcId,
    residual: &mut ResidualPlan,
) -> Option<LinkWalk> {
    let ResidualPlan { values, slots, sink_flow, nodes, node_of, offsets, num_dcs } = residual;
    debug_assert_eq!(net.num_dcs(), *num_dcs);
    let base = (offsets[app.0][e.0] + s.0) * *num_dcs;
    let mut v = s;
    let mut entries = Vec::new();
    let mut path = Vec::new();
    let mut lambda = f64::INFINITY;
    let mut seen = vec![s];
    loop {
        let at = node_of[base + v.0];
        if at == u32::MAX {
            return None;
        }
        let node = &mut nodes[at as usize];
        if let Some((w, i)) = ResidualPlan::first_positive(values, &node.transient, &mut node.t_cursor) {
            if seen.contains(&w) || entries.len() >= *num_dcs {
                return None;
            }
            seen.push(w);
            lambda = lambda.min(values[i]);
            entries.push(i);
            if let ArcSlot::Arc(a) = slots[i] {
                path.push(a);
            }
            v = w;
            continue;
        }
        let (w, i) = ResidualPlan::first_positive(values, &node.direct, &mut node.d_cursor)?;
        if !sink_flow[i] {
            lambda = lambda.min(values[i]);
        }
        entries.push(i);
        // A direct arc back onto the walk closes a loop; stop at the first visit.
        if let Some(pos) = seen.iter().position(|&x| x == w) {
            path.truncate(pos);
        } else if let ArcSlot::Arc(a) = slots[i] {
            path.push(a);
        }
        return Some(LinkWalk { entries, path, destination: w, lambda });
    }
}

/// Embedding found for one user before allocation.
#[derive(Debug, Clone, PartialEq)]
pub enum AppWalk {
    /// The walk of the first link ends on the sink.
    Sink {
        entries: Vec<usize>,
    },
    Real {
        embedding: UserEmbedding,
        entries: Vec<usize>,
        lambda: f64,
    },
    /// Some link had no positive flow; `entries` were walked before that.
    Blocked {
        entries: Vec<usize>,
        lambda: f64,
    },
}

/// Walks every logical link of `app` in BFS order starting at `s`.
pub fn embed_app_from_dc(
    net: &SubstrateNetwork,
    a: AppId,
    app: &Application,
    s: DcId,
    residual: &mut ResidualPlan,
    arcs_per_call: &mut usize,
) -> AppWalk {
    let mut placement = vec![s; app.functions().len()];
    let mut paths = vec![Vec::new(); app.num_links()];
    let mut entries = Vec::new();
    let mut lambda = f64::INFINITY;
    for e in app.link_ids() {
        let link = app.link(e);
        let from = placement[link.from.0];
        let Some(walk) = embed_link_from_dc(net, a, e, from, residual) else {
            return AppWalk::Blocked { entries, lambda: 0.0 };
        };
        *arcs_per_call = (*arcs_per_call).max(walk.path.len());
        if link.from == ROOT && net.is_sink(walk.destination) {
            return AppWalk::Sink { entries: walk.entries };
        }
        lambda = lambda.min(walk.lambda);
        entries.extend_from_slice(&walk.entries);
        placement[link.to.0] = walk.destination;
        paths[e.0] = walk.path;
    }
    AppWalk::Real { embedding: UserEmbedding { placement, paths }, entries, lambda }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RoundingCounters {
    /// Residual variables driven to zero by a rejection.
    pub zeroed: usize,
    pub link_walks: usize,
    /// Longest path walked by any single link walk.
    pub max_arcs_per_walk: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingOutcome {
    pub deployment: Deployment,
    pub rejected_by_plan: BTreeSet<usize>,
    pub rejected_by_rounding: BTreeSet<usize>,
    /// Residual available to each user (infinite when routed to the sink).
    pub lambda: Vec<f64>,
    pub counters: RoundingCounters,
    pub bound: usize,
}

impl RoundingOutcome {
    pub fn total_rejected(&self) -> usize {
        self.rejected_by_plan.len() + self.rejected_by_rounding.len()
    }
}

/// `2 sum_a |V| |E| |E^a|` with the sink counted in `V` and its links in `E`.
pub fn rounding_bound(net: &SubstrateNetwork, apps: &[Application]) -> usize {
    apps.iter().map(|a| 2 * net.num_dcs() * net.num_links() * a.num_links()).sum()
}

/// Subtracts `amount` from every walked entry. Returns how many reached zero.
pub fn allocate(residual: &mut ResidualPlan, entries: &[usize], amount: f64) -> Result<usize> {
    let mut zeroed = 0;
    for &i in entries {
        let v = residual.values[i] - amount;
        if v < -CLAMP * amount.max(1.0) && !residual.sink_flow[i] {
            return Err(Error::Internal(format!("residual flow {i} driven to {v}")));
        }
        if v <= CLAMP {
            if residual.values[i] > 0.0 {
                zeroed += 1;
            }
            residual.values[i] = 0.0;
        } else {
            residual.values[i] = v;
        }
    }
    Ok(zeroed)
}

fn check_plan(users: &DemandSet, plan: &FlowSolution) -> Result<()> {
    let want = users.aggregate();
    let have = plan.aggregate();
    let same = want.len() == have.len()
        && want.iter().all(|(k, v)| have.get(k).is_some_and(|h| (h - v).abs() <= 1e-9 * v.abs().max(1.0)));
    if same {
        Ok(())
    } else {
        Err(Error::Rounding("the plan was built for a different aggregate demand".into()))
    }
}

/// Rounds `plan` into per-user embeddings, visiting users in order.
pub fn round_all(
    users: &DemandSet,
    plan: &FlowSolution,
    net: &SubstrateNetwork,
    apps: &[Application],
) -> Result<RoundingOutcome> {
    check_plan(users, plan)?;
    let mut residual = ResidualPlan::new(net, apps, plan);
    round_with(users.users(), &mut residual, net, apps)
}

pub(crate) fn round_with(
    users: &[User],
    residual: &mut ResidualPlan,
    net: &SubstrateNetwork,
    apps: &[Application],
) -> Result<RoundingOutcome> {
    let mut embeddings = Vec::with_capacity(users.len());
    let mut by_plan = BTreeSet::new();
    let mut by_rounding = BTreeSet::new();
    let mut lambdas = Vec::with_capacity(users.len());
    let mut counters = RoundingCounters::default();
    for (ui, u) in users.iter().enumerate() {
        let app = &apps[u.app.0];
        let mut arcs = 0;
        let walk = embed_app_from_dc(net, u.app, app, u.dc, residual, &mut arcs);
        counters.max_arcs_per_walk = counters.max_arcs_per_walk.max(arcs);
        match walk {
            AppWalk::Sink { entries } => {
                counters.link_walks += 1;
                allocate(residual, &entries, u.demand)?;
                by_plan.insert(ui);
                lambdas.push(f64::INFINITY);
                embeddings.push(None);
            }
            AppWalk::Real { embedding, entries, lambda } if lambda >= u.demand - CLAMP * u.demand.max(1.0) => {
                counters.link_walks += app.num_links();
                allocate(residual, &entries, u.demand)?;
                lambdas.push(lambda);
                embeddings.push(Some(embedding));
            }
            AppWalk::Real { entries, lambda, .. } | AppWalk::Blocked { entries, lambda } => {
                counters.link_walks += app.num_links();
                counters.zeroed += allocate(residual, &entries, lambda)?;
                by_rounding.insert(ui);
                lambdas.push(lambda);
                embeddings.push(None);
            }
        }
    }
    if counters.max_arcs_per_walk > net.num_dcs() {
        return Err(Error::Internal(format!(
            "a link walk visited {} arcs on {} DCs",
            counters.max_arcs_per_walk,
            net.num_dcs()
        )));
    }
    let bound = rounding_bound(net, apps);
    if by_rounding.len() > bound {
        return Err(Error::Internal(format!(
            "{} users rejected by rounding exceed the bound {bound}",
            by_rounding.len()
        )));
    }
    let deployment = Deployment::new(net, apps, users, embeddings);
    Ok(RoundingOutcome {
        deployment,
        rejected_by_plan: by_plan,
        rejected_by_rounding: by_rounding,
        lambda: lambdas,
        counters,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;
    use crate::model::{validate_deployment, EdgeSpec};
    use crate::planner::{plan, FlowKey, PlannerOptions};
    use crate::testutil::{instance, network, random_instance_with, Instance, INF};

    fn fractional(inst: &Instance) -> FlowSolution {
        plan(&inst.net, &inst.apps, inst.aggregate(), &inst.tables, &PlannerOptions::default()).unwrap()
    }

    fn key(inst: &Instance, link: usize, source: usize, to: Option<usize>, kind: FlowKind) -> FlowKey {
        let slot = match to {
            None => ArcSlot::Intra,
            Some(t) => {
                ArcSlot::Arc(inst.net.arc_between(DcId(source), DcId(t)).unwrap_or_else(|| panic!("{source}->{t}")))
            }
        };
        FlowKey { app: AppId(0), link: LogicalLinkId(link), source: DcId(source), slot, kind }
    }

    fn hand_plan(inst: &Instance, flows: &[(FlowKey, f64)]) -> FlowSolution {
        let flows: BTreeMap<FlowKey, f64> = flows.iter().copied().collect();
        FlowSolution::from_flows(&inst.net, &inst.apps, inst.aggregate(), flows, Default::default()).unwrap()
    }

    fn line3() -> Instance {
        let net = network(&[(10.0, 1.0), (10.0, 1.0), (10.0, 1.0)], &[(0, 1, 10.0, 1.0, 1.0), (1, 2, 10.0, 1.0, 1.0)]);
        instance(net, vec![Application::chain("a", &["f1"], INF).unwrap()], &[(0, 0, 1.0)])
    }

    #[test]
    fn integral_plan_accepts_everyone() {
        let net = network(&[(100.0, 1.0), (100.0, 2.0)], &[(0, 1, 100.0, 1.0, 1.0)]);
        let app = Application::chain("a", &["f1", "f2"], INF).unwrap();
        let inst = instance(net, vec![app], &[(0, 0, 1.0), (0, 1, 2.0), (0, 0, 3.0)]);
        let out = round_all(&inst.users, &fractional(&inst), &inst.net, &inst.apps).unwrap();
        assert_eq!(out.total_rejected(), 0);
        assert!(validate_deployment(&inst.net, &inst.apps, inst.users.users(), &out.deployment).unwrap().feasible());
    }

    #[test]
    fn three_users_on_five_adu() {
        let net = network(&[(0.0, 1.0), (10.0, 1.0)], &[(0, 1, 10.0, 1.0, 1.0)]);
        let inst = instance(net, vec![Application::chain("a", &["f1"], INF).unwrap()], &[(0, 0, 2.0); 3]);
        let plan = hand_plan(
            &inst,
            &[(key(&inst, 0, 0, Some(1), FlowKind::Direct), 5.0), (key(&inst, 1, 1, None, FlowKind::Direct), 5.0)],
        );
        let mut residual = ResidualPlan::new(&inst.net, &inst.apps, &plan);
        let out = round_with(inst.users.users(), &mut residual, &inst.net, &inst.apps).unwrap();
        assert_eq!(out.deployment.num_accepted(), 2);
        assert_eq!(out.rejected_by_rounding, BTreeSet::from([2]));
        assert!((out.lambda[2] - 1.0).abs() < 1e-12);
        assert!(residual.values().iter().all(|&v| v == 0.0));
        assert_eq!(out.counters.zeroed, 2);
    }

    #[test]
    fn sink_only_plan_rejects_by_plan() {
        let net = network(&[(0.0, 1.0), (0.0, 1.0)], &[(0, 1, 0.0, 1.0, 1.0)]);
        let inst = instance(net, vec![Application::chain("a", &["f1"], INF).unwrap()], &[(0, 0, 1.0), (0, 1, 2.0)]);
        let out = round_all(&inst.users, &fractional(&inst), &inst.net, &inst.apps).unwrap();
        assert_eq!(out.rejected_by_plan.len(), 2);
        assert!(out.rejected_by_rounding.is_empty());
        assert_eq!(out.deployment.num_rejected(), 2);
    }

    #[test]
    fn intra_walk() {
        let inst = line3();
        let plan = hand_plan(&inst, &[(key(&inst, 0, 0, None, FlowKind::Direct), 4.0)]);
        let mut r = ResidualPlan::new(&inst.net, &inst.apps, &plan);
        let w = embed_link_from_dc(&inst.net, AppId(0), LogicalLinkId(0), DcId(0), &mut r).unwrap();
        assert!(w.path.is_empty());
        assert_eq!((w.destination, w.lambda), (DcId(0), 4.0));
    }

    #[test]
    fn transient_then_direct() {
        let inst = line3();
        let mut onward = key(&inst, 0, 0, None, FlowKind::Direct);
        onward.slot = ArcSlot::Arc(inst.net.arc_between(DcId(1), DcId(2)).unwrap());
        let plan = hand_plan(&inst, &[(key(&inst, 0, 0, Some(1), FlowKind::Transient), 3.0), (onward, 2.0)]);
        let mut r = ResidualPlan::new(&inst.net, &inst.apps, &plan);
        let w = embed_link_from_dc(&inst.net, AppId(0), LogicalLinkId(0), DcId(0), &mut r).unwrap();
        let arcs: Vec<(usize, usize)> =
            w.path.iter().map(|&a| (inst.net.arc(a).from.0, inst.net.arc(a).to.0)).collect();
        assert_eq!(arcs, vec![(0, 1), (1, 2)]);
        assert_eq!((w.destination, w.lambda), (DcId(2), 2.0));
    }

    #[test]
    fn lowest_destination_wins() {
        let net = network(&[(10.0, 1.0), (10.0, 1.0), (10.0, 1.0)], &[(0, 1, 10.0, 1.0, 1.0), (0, 2, 10.0, 1.0, 1.0)]);
        let inst = instance(net, vec![Application::chain("a", &["f1"], INF).unwrap()], &[(0, 0, 1.0)]);
        let plan = hand_plan(
            &inst,
            &[(key(&inst, 0, 0, Some(2), FlowKind::Direct), 1.0), (key(&inst, 0, 0, Some(1), FlowKind::Direct), 1.0)],
        );
        let mut r = ResidualPlan::new(&inst.net, &inst.apps, &plan);
        let w = embed_link_from_dc(&inst.net, AppId(0), LogicalLinkId(0), DcId(0), &mut r).unwrap();
        assert_eq!(w.destination, DcId(1));
    }

    #[test]
    fn lambda_is_min_over_links() {
        let net = network(&[(10.0, 1.0), (10.0, 1.0), (10.0, 1.0)], &[(0, 1, 10.0, 1.0, 1.0), (1, 2, 10.0, 1.0, 1.0)]);
        let app = Application::chain("a", &["f1", "f2"], INF).unwrap();
        let inst = instance(net, vec![app], &[(0, 0, 1.0)]);
        let plan = hand_plan(
            &inst,
            &[
                (key(&inst, 0, 0, None, FlowKind::Direct), 3.0),
                (key(&inst, 1, 0, Some(1), FlowKind::Direct), 1.0),
                (key(&inst, 2, 1, None, FlowKind::Direct), 1.0),
            ],
        );
        let mut r = ResidualPlan::new(&inst.net, &inst.apps, &plan);
        let mut arcs = 0;
        match embed_app_from_dc(&inst.net, AppId(0), &inst.apps[0], DcId(0), &mut r, &mut arcs) {
            AppWalk::Real { lambda, embedding, .. } => {
                assert_eq!(lambda, 1.0);
                assert_eq!(embedding.placement, vec![DcId(0), DcId(0), DcId(1), DcId(1)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_lambda_leaves_flows() {
        let inst = line3();
        let plan = hand_plan(&inst, &[(key(&inst, 0, 0, None, FlowKind::Direct), 4.0)]);
        let mut r = ResidualPlan::new(&inst.net, &inst.apps, &plan);
        assert_eq!(allocate(&mut r, &[0], 0.0).unwrap(), 0);
        assert_eq!(r.value(0), 4.0);
    }

    #[test]
    fn tree_branches_start_at_fork() {
        let net = network(
            &[(1.0, 5.0), (2.0, 1.0), (2.0, 1.0)],
            &[(0, 1, 10.0, 1.0, 1.0), (1, 2, 10.0, 1.0, 1.0), (0, 2, 10.0, 1.0, 1.0)],
        );
        let app = Application::new(
            "t",
            &["x", "y", "z"],
            &[EdgeSpec::new("U", "x", INF), EdgeSpec::new("x", "y", INF), EdgeSpec::new("x", "z", INF)],
            1.0,
            1.0,
        )
        .unwrap();
        let inst = instance(net, vec![app], &[(0, 0, 1.0), (0, 0, 1.0)]);
        let out = round_all(&inst.users, &fractional(&inst), &inst.net, &inst.apps).unwrap();
        for emb in out.deployment.embeddings.iter().flatten() {
            let app = &inst.apps[0];
            for e in app.link_ids() {
                let from = emb.host(app.link(e).from);
                if let Some(&first) = emb.path(e).first() {
                    assert_eq!(inst.net.arc(first).from, from);
                }
            }
        }
        assert!(validate_deployment(&inst.net, &inst.apps, inst.users.users(), &out.deployment).unwrap().feasible());
    }

    #[test]
    fn mismatched_plan_is_refused() {
        let inst = line3();
        let net = network(&[(10.0, 1.0), (10.0, 1.0), (10.0, 1.0)], &[(0, 1, 10.0, 1.0, 1.0), (1, 2, 10.0, 1.0, 1.0)]);
        let other = instance(net, vec![Application::chain("a", &["f1"], INF).unwrap()], &[(0, 0, 2.0)]);
        let plan = fractional(&other);
        assert!(round_all(&inst.users, &plan, &inst.net, &inst.apps).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rounding_invariants(seed in any::<u64>(), order_seed in any::<u64>()) {
            let inst = random_instance_with(seed, 1.0, 12);
            let plan = fractional(&inst);
            let mut order: Vec<usize> = (0..inst.users.len()).collect();
            let mut st = order_seed | 1;
            for i in (1..order.len()).rev() {
                st ^= st << 13; st ^= st >> 7; st ^= st << 17;
                order.swap(i, (st % (i as u64 + 1)) as usize);
            }
            let users = inst.users.reordered(&order);
            let mut residual = ResidualPlan::new(&inst.net, &inst.apps, &plan);
            let before = residual.values().to_vec();
            let out = round_with(users.users(), &mut residual, &inst.net, &inst.apps).unwrap();
            prop_assert!(out.rejected_by_rounding.len() <= rounding_bound(&inst.net, &inst.apps));
            prop_assert!(out.counters.max_arcs_per_walk <= inst.net.num_dcs());
            prop_assert!(residual.values().iter().zip(&before).all(|(a, b)| a <= b));
            let report = validate_deployment(&inst.net, &inst.apps, users.users(), &out.deployment).unwrap();
            prop_assert!(report.feasible(), "{:?}", report.violations);
            // Accepted ADU per (app, link, arc) stays within the plan's link load.
            let mut used: BTreeMap<(AppId, LogicalLinkId, ArcId), f64> = BTreeMap::new();
            for (u, emb) in users.users().iter().zip(&out.deployment.embeddings) {
                if let Some(emb) = emb {
                    for e in inst.apps[u.app.0].link_ids() {
                        for &a in emb.path(e) {
                            *used.entry((u.app, e, a)).or_default() += u.demand;
                        }
                    }
                }
            }
            for (k, v) in used {
                let cap = plan.link_load.iter().find(|l| (l.app, l.link, l.arc) == k).map_or(0.0, |l| l.adu);
                prop_assert!(v <= cap + 1e-6, "{k:?}: {v} > {cap}");
            }
        }
    }
}
