use serde::{Deserialize, Serialize};

use super::paths::candidate_paths;
use crate::error::{Error, Result};
use crate::latency::LatencyTables;
use crate::lp::{solve_mip, LinearModel, MipOptions, Relation, Status, VarId};
use crate::model::{
    deployment_cost, Application, ArcId, DcId, Deployment, FunctionKind, LinkId, LogicalLinkId, SubstrateNetwork, User,
    UserEmbedding, ROOT,
};

/// Largest instance the path-enumerated model is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactCeiling {
    pub dcs: usize,
    pub links: usize,
    pub users: usize,
    pub apps: usize,
}

impl Default for ExactCeiling {
    fn default() -> Self {
        ExactCeiling { dcs: 6, links: 10, users: 12, apps: 2 }
    }
}

impl ExactCeiling {
    pub fn admits(&self, net: &SubstrateNetwork, apps: &[Application], users: &[User]) -> bool {
        self.check(net, apps, users).is_ok()
    }

    fn check(&self, net: &SubstrateNetwork, apps: &[Application], users: &[User]) -> Result<()> {
        let links = net.links().iter().enumerate().filter(|(i, _)| !net.is_sink_link(crate::model::LinkId(*i))).count();
        let sizes = [
            ("DCs", net.num_real_dcs(), self.dcs),
            ("links", links, self.links),
            ("users", users.len(), self.users),
            ("applications", apps.len(), self.apps),
        ];
        for (what, n, max) in sizes {
            if n > max {
                return Err(Error::TooLarge(format!("{n} {what}, ceiling is {max}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExactOptions {
    pub ceiling: ExactCeiling,
    pub mip: MipOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactSolution {
    pub deployment: Deployment,
    /// False when the search stopped at a limit; the deployment is then the
    /// best incumbent found.
    pub proven: bool,
    pub objective: f64,
}

struct PathVar {
    var: VarId,
    source: DcId,
    target: DcId,
    arcs: Vec<ArcId>,
}

/// Solves the integral deployment problem over explicitly enumerated paths.
/// Each user either takes one path per logical link or is sent to the sink.
pub fn solve_exact(
    net: &SubstrateNetwork,
    apps: &[Application],
    users: &[User],
    tables: &LatencyTables,
    opts: &ExactOptions,
) -> Result<ExactSolution> {
    opts.ceiling.check(net, apps, users)?;
    let sink = net.sink().ok_or_else(|| Error::Planner("the exact solver needs the rejection sink".into()))?;
    if users.is_empty() {
        let deployment = Deployment::new(net, apps, users, Vec::new());
        return Ok(ExactSolution { deployment, proven: true, objective: 0.0 });
    }

    let mut m = LinearModel::new();
    let mut ecu: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); net.num_dcs()];
    let mut bwu: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); net.num_links()];
    // Per user: the reject variable and the path variables per logical link.
    let mut chosen: Vec<(VarId, Vec<Vec<PathVar>>)> = Vec::with_capacity(users.len());

    for (ui, u) in users.iter().enumerate() {
        let app = &apps[u.app.0];
        let dem = u.demand;
        let reject = m.add_int_var(format!("r{ui}"), 0.0, 1.0, dem * app.sink_ecu_per_adu() * net.dc(sink).cost)?;
        let mut per_link: Vec<Vec<PathVar>> = (0..app.num_links()).map(|_| Vec::new()).collect();
        // Hosts the head of each link may land on.
        let mut heads: Vec<Vec<DcId>> = vec![Vec::new(); app.num_links()];
        for e in app.link_ids() {
            let link = app.link(e);
            let sources: Vec<DcId> = if link.from == ROOT {
                vec![u.dc]
            } else {
                let parent = parent_link(app, e)?;
                heads[parent.0].clone()
            };
            if app.function(link.to).kind == FunctionKind::Terminator {
                heads[e.0] = sources;
                continue;
            }
            for &d in &sources {
                for t in net.real_dcs() {
                    let fits = |need: f64, cap: f64| need <= cap + 1e-9 * cap.abs().max(1.0);
                    if !fits(dem * app.xi_node(link.to, t), net.dc(t).capacity) {
                        continue;
                    }
                    for arcs in candidate_paths(net, tables, d, t, link.latency_bound) {
                        // Paths one user alone would overload are never part of a solution.
                        if arcs.iter().any(|&a| {
                            let l = net.arc(a).link;
                            !fits(dem * app.xi_link(e, l), net.link(l).capacity)
                        }) {
                            continue;
                        }
                        let mut cost = app.xi_node(link.to, t) * net.dc(t).cost;
                        for &a in &arcs {
                            let l = net.arc(a).link;
                            cost += app.xi_link(e, l) * net.link(l).cost;
                        }
                        let var =
                            m.add_int_var(format!("y{ui}_{}_{}", e.0, per_link[e.0].len()), 0.0, 1.0, dem * cost)?;
                        let xi = app.xi_node(link.to, t);
                        if xi != 0.0 && net.dc(t).capacity.is_finite() {
                            ecu[t.0].push((var, dem * xi));
                        }
                        for &a in &arcs {
                            let l = net.arc(a).link;
                            let xi = app.xi_link(e, l);
                            if xi != 0.0 && net.link(l).capacity.is_finite() {
                                bwu[l.0].push((var, dem * xi));
                            }
                        }
                        if !heads[e.0].contains(&t) {
                            heads[e.0].push(t);
                        }
                        per_link[e.0].push(PathVar { var, source: d, target: t, arcs });
                    }
                }
            }
        }

        for e in app.link_ids() {
            let link = app.link(e);
            if app.function(link.to).kind == FunctionKind::Terminator {
                continue;
            }
            if link.from == ROOT {
                let mut row: Vec<(VarId, f64)> = per_link[e.0].iter().map(|p| (p.var, 1.0)).collect();
                row.push((reject, 1.0));
                m.add_con(format!("one_{ui}"), row, Relation::Eq, 1.0)?;
                continue;
            }
            let parent = parent_link(app, e)?;
            for d in net.real_dcs() {
                let mut row: Vec<(VarId, f64)> =
                    per_link[e.0].iter().filter(|p| p.source == d).map(|p| (p.var, 1.0)).collect();
                row.extend(per_link[parent.0].iter().filter(|p| p.target == d).map(|p| (p.var, -1.0)));
                if !row.is_empty() {
                    m.add_con(format!("link_{ui}_{}_{}", e.0, d.0), row, Relation::Eq, 0.0)?;
                }
            }
        }
        chosen.push((reject, per_link));
    }

    // Host index of the head of a logical link; zero when the user is rejected.
    let host = |per_link: &[Vec<PathVar>], e: usize, sign: f64| -> Vec<(VarId, f64)> {
        per_link[e].iter().filter(|p| p.target.0 > 0).map(|p| (p.var, sign * p.target.0 as f64)).collect()
    };
    // Identical users are interchangeable: accepted ones first, ordered by
    // the host of their first function.
    let top = net.num_dcs() as f64;
    for (i, u) in users.iter().enumerate() {
        let twin = users[i + 1..].iter().position(|v| v.app == u.app && v.dc == u.dc && v.demand == u.demand);
        if let Some(k) = twin {
            let j = i + 1 + k;
            m.add_con(format!("sym_{i}_{j}"), vec![(chosen[i].0, 1.0), (chosen[j].0, -1.0)], Relation::Le, 0.0)?;
            let root = apps[u.app.0].link_ids().find(|&e| apps[u.app.0].is_root_link(e)).map(|e| e.0);
            if let Some(e) = root {
                let mut row = host(&chosen[i].1, e, 1.0);
                row.extend(host(&chosen[j].1, e, -1.0));
                row.push((chosen[j].0, -top));
                m.add_con(format!("symhost_{i}_{j}"), row, Relation::Le, 0.0)?;
            }
        }
    }
    // So are sibling leaves with the same requirements.
    for (ui, u) in users.iter().enumerate() {
        for (a, b) in twin_leaves(net, &apps[u.app.0]) {
            let mut row = host(&chosen[ui].1, a.0, 1.0);
            row.extend(host(&chosen[ui].1, b.0, -1.0));
            if !row.is_empty() {
                m.add_con(format!("leaf_{ui}_{}_{}", a.0, b.0), row, Relation::Le, 0.0)?;
            }
        }
    }

    for (d, row) in ecu.into_iter().enumerate() {
        if !row.is_empty() {
            m.add_con(format!("cap_dc_{d}"), row, Relation::Le, net.dc(DcId(d)).capacity)?;
        }
    }
    for (l, row) in bwu.into_iter().enumerate() {
        if !row.is_empty() {
            m.add_con(format!("cap_link_{l}"), row, Relation::Le, net.links()[l].capacity)?;
        }
    }

    let mut mip = opts.mip.clone();
    mip.priority = chosen.iter().map(|c| c.0).collect();
    // Largest users first.
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.sort_by(|&a, &b| users[b].demand.total_cmp(&users[a].demand));
    mip.families = order
        .iter()
        .flat_map(|&u| chosen[u].1.iter())
        .filter(|paths| !paths.is_empty())
        .map(|paths| paths.iter().map(|p| (p.var, p.target.0)).collect())
        .collect();
    let res = solve_mip(&m, &mip)?;
    if res.result.x.is_empty() {
        return Err(Error::Internal(format!("exact model has no solution ({:?})", res.result.status)));
    }
    let x = &res.result.x;
    let on = |v: VarId| x[v.0] > 0.5;

    let mut embeddings = Vec::with_capacity(users.len());
    for (u, (reject, per_link)) in users.iter().zip(&chosen) {
        if on(*reject) {
            embeddings.push(None);
            continue;
        }
        let app = &apps[u.app.0];
        let mut placement = vec![u.dc; app.functions().len()];
        let mut paths = vec![Vec::new(); app.num_links()];
        for e in app.link_ids() {
            let link = app.link(e);
            if app.function(link.to).kind == FunctionKind::Terminator {
                placement[link.to.0] = placement[link.from.0];
                continue;
            }
            let p = per_link[e.0]
                .iter()
                .find(|p| on(p.var))
                .ok_or_else(|| Error::Internal(format!("accepted user {} has no path on link {}", u.id, e.0)))?;
            placement[link.to.0] = p.target;
            paths[e.0] = p.arcs.clone();
        }
        embeddings.push(Some(UserEmbedding { placement, paths }));
    }
    let deployment = Deployment::new(net, apps, users, embeddings);
    let objective = deployment_cost(net, apps, users, &deployment);
    Ok(ExactSolution { deployment, proven: res.proven && res.result.status == Status::Optimal, objective })
}

/// Consecutive pairs of logical links from one function to leaves that could
/// swap hosts without changing cost, load or latency.
fn twin_leaves(net: &SubstrateNetwork, app: &Application) -> Vec<(LogicalLinkId, LogicalLinkId)> {
    let leaf = |e: LogicalLinkId| {
        let to = app.link(e).to;
        app.function(to).kind != FunctionKind::Terminator && app.out_links(to).all(|o| app.is_terminator_link(o))
    };
    let same = |a: LogicalLinkId, b: LogicalLinkId| {
        let (la, lb) = (app.link(a), app.link(b));
        la.from == lb.from
            && la.latency_bound == lb.latency_bound
            && net.dc_ids().all(|d| app.xi_node(la.to, d) == app.xi_node(lb.to, d))
            && (0..net.num_links()).all(|l| app.xi_link(a, LinkId(l)) == app.xi_link(b, LinkId(l)))
    };
    let leaves: Vec<LogicalLinkId> = app.link_ids().filter(|&e| leaf(e)).collect();
    let mut pairs = Vec::new();
    for (i, &a) in leaves.iter().enumerate() {
        if let Some(&b) = leaves[i + 1..].iter().find(|&&b| same(a, b)) {
            pairs.push((a, b));
        }
    }
    pairs
}

fn parent_link(app: &Application, e: LogicalLinkId) -> Result<LogicalLinkId> {
    let from = app.link(e).from;
    app.link_ids()
        .find(|&p| app.link(p).to == from)
        .ok_or_else(|| Error::Internal(format!("logical link {} of `{}` has no parent", e.0, app.name)))
}
