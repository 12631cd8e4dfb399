use std::fmt;

use super::application::{Application, FunctionKind, LogicalLinkId, ROOT};
use super::demand::User;
use super::deployment::{Deployment, Ledger};
use super::network::{DcId, LinkId, SubstrateNetwork};
use crate::error::{Error, Result};

/// Absolute tolerance for capacity, latency and ledger comparisons.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Neither embedded nor rejected.
    Unassigned {
        user: usize,
    },
    /// The root is not placed at the user's entry DC.
    UserLocation {
        user: usize,
        placed: DcId,
        entry: DcId,
    },
    /// A path does not connect the hosts of its two functions.
    BrokenChain {
        user: usize,
        link: LogicalLinkId,
    },
    /// A path visits some DC twice.
    PathLoop {
        user: usize,
        link: LogicalLinkId,
    },
    /// A path leaves the rejection sink.
    ThroughSink {
        user: usize,
        link: LogicalLinkId,
    },
    /// A terminator link is routed across DCs.
    TerminatorNotIntra {
        user: usize,
        link: LogicalLinkId,
    },
    Latency {
        user: usize,
        link: LogicalLinkId,
        latency: f64,
        bound: f64,
    },
    DcCapacity {
        dc: DcId,
        used: f64,
        capacity: f64,
    },
    LinkCapacity {
        link: LinkId,
        used: f64,
        capacity: f64,
    },
    /// The stored ledger disagrees with the ξ-weighted allocations.
    LedgerMismatch {
        what: String,
        stored: f64,
        expected: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unassigned { user } => write!(f, "user #{user} is neither embedded nor rejected"),
            Violation::UserLocation { user, placed, entry } => {
                write!(f, "user #{user}: root placed on {placed}, entry is {entry}")
            }
            Violation::BrokenChain { user, link } => write!(f, "user #{user}: path of link {} does not chain", link.0),
            Violation::PathLoop { user, link } => write!(f, "user #{user}: path of link {} has a loop", link.0),
            Violation::ThroughSink { user, link } => write!(f, "user #{user}: link {} transits the sink", link.0),
            Violation::TerminatorNotIntra { user, link } => {
                write!(f, "user #{user}: terminator link {} is not intra-DC", link.0)
            }
            Violation::Latency { user, link, latency, bound } => {
                write!(f, "user #{user}: link {} latency {latency} exceeds {bound}", link.0)
            }
            Violation::DcCapacity { dc, used, capacity } => write!(f, "{dc}: {used} ECU used, capacity {capacity}"),
            Violation::LinkCapacity { link, used, capacity } => {
                write!(f, "link #{}: {used} BWU used, capacity {capacity}", link.0)
            }
            Violation::LedgerMismatch { what, stored, expected } => {
                write!(f, "ledger {what}: stored {stored}, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a deployment against every constraint of the integral problem and
/// returns all violations found. Broken references are reported as
/// [`Error::Structural`] instead.
pub fn validate_deployment(
    net: &SubstrateNetwork,
    apps: &[Application],
    users: &[User],
    dep: &Deployment,
) -> Result<FeasibilityReport> {
    check_structure(net, apps, users, dep)?;
    let mut violations = Vec::new();

    for (u, (user, emb)) in users.iter().zip(&dep.embeddings).enumerate() {
        let Some(emb) = emb else {
            if !dep.rejected.contains(&u) {
                violations.push(Violation::Unassigned { user: u });
            }
            continue;
        };
        let app = &apps[user.app.0];
        if emb.host(ROOT) != user.dc {
            violations.push(Violation::UserLocation { user: u, placed: emb.host(ROOT), entry: user.dc });
        }
        for e in app.link_ids() {
            let link = app.link(e);
            let (src, dst) = (emb.host(link.from), emb.host(link.to));
            let path = emb.path(e);
            if app.function(link.to).kind == FunctionKind::Terminator && !path.is_empty() {
                violations.push(Violation::TerminatorNotIntra { user: u, link: e });
            }
            if path.is_empty() {
                if src != dst {
                    violations.push(Violation::BrokenChain { user: u, link: e });
                }
                continue;
            }
            let mut at = src;
            let mut seen = vec![src];
            let mut latency = 0.0;
            let mut chained = true;
            let mut looped = false;
            let mut via_sink = false;
            for &a in path {
                let arc = net.arc(a);
                if arc.from != at {
                    chained = false;
                }
                if net.is_sink(arc.from) {
                    via_sink = true;
                }
                at = arc.to;
                if seen.contains(&at) {
                    looped = true;
                }
                seen.push(at);
                latency += net.link(arc.link).latency;
            }
            if !chained || at != dst {
                violations.push(Violation::BrokenChain { user: u, link: e });
            }
            if looped {
                violations.push(Violation::PathLoop { user: u, link: e });
            }
            if via_sink {
                violations.push(Violation::ThroughSink { user: u, link: e });
            }
            if latency > link.latency_bound + FEAS_TOL {
                violations.push(Violation::Latency { user: u, link: e, latency, bound: link.latency_bound });
            }
        }
    }

    let expected = Ledger::compute(net, apps, users, &dep.embeddings);
    for d in net.dc_ids() {
        let used = expected.dc_ecu[d.0];
        let capacity = net.dc(d).capacity;
        if used > capacity + FEAS_TOL {
            violations.push(Violation::DcCapacity { dc: d, used, capacity });
        }
        let stored = dep.ledger.dc_ecu[d.0];
        if (stored - used).abs() > FEAS_TOL * used.abs().max(1.0) {
            violations.push(Violation::LedgerMismatch { what: format!("ECU of {d}"), stored, expected: used });
        }
    }
    for l in 0..net.num_links() {
        let used = expected.link_bwu[l];
        let capacity = net.link(LinkId(l)).capacity;
        if used > capacity + FEAS_TOL {
            violations.push(Violation::LinkCapacity { link: LinkId(l), used, capacity });
        }
        let stored = dep.ledger.link_bwu[l];
        if (stored - used).abs() > FEAS_TOL * used.abs().max(1.0) {
            violations.push(Violation::LedgerMismatch { what: format!("BWU of link #{l}"), stored, expected: used });
        }
    }
    Ok(FeasibilityReport { violations })
}

fn check_structure(net: &SubstrateNetwork, apps: &[Application], users: &[User], dep: &Deployment) -> Result<()> {
    let bad = |m: String| Err(Error::Structural(m));
    if dep.embeddings.len() != users.len() {
        return bad(format!("{} embeddings for {} users", dep.embeddings.len(), users.len()));
    }
    if dep.ledger.dc_ecu.len() != net.num_dcs() || dep.ledger.link_bwu.len() != net.num_links() {
        return bad("ledger does not match the network size".into());
    }
    if let Some(&u) = dep.rejected.iter().next_back() {
        if u >= users.len() {
            return bad(format!("rejected user #{u} does not exist"));
        }
    }
    for (u, (user, emb)) in users.iter().zip(&dep.embeddings).enumerate() {
        if user.app.0 >= apps.len() || user.dc.0 >= net.num_dcs() {
            return bad(format!("user #{u} references an unknown app or DC"));
        }
        let Some(emb) = emb else { continue };
        if dep.rejected.contains(&u) {
            return bad(format!("user #{u} is both embedded and rejected"));
        }
        let app = &apps[user.app.0];
        if emb.placement.len() != app.functions().len() || emb.paths.len() != app.num_links() {
            return bad(format!("user #{u}: embedding shape does not match app `{}`", app.name));
        }
        if emb.placement.iter().any(|d| d.0 >= net.num_dcs()) {
            return bad(format!("user #{u}: placement references an unknown DC"));
        }
        if emb.paths.iter().flatten().any(|a| a.0 >= net.num_arcs()) {
            return bad(format!("user #{u}: path references an unknown arc"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::application::AppId;
    use crate::model::deployment::UserEmbedding;
    use crate::model::network::{ArcId, Dc, Layer, Link};

    fn net(cap: f64) -> SubstrateNetwork {
        let dc = |n: &str| Dc { name: n.into(), capacity: cap, cost: 1.0, layer: Layer::Edge, geo: None };
        SubstrateNetwork::new(
            vec![dc("a"), dc("b"), dc("c")],
            vec![
                Link { a: DcId(0), b: DcId(1), capacity: 10.0, cost: 1.0, latency: 2.0 },
                Link { a: DcId(1), b: DcId(2), capacity: 10.0, cost: 1.0, latency: 2.0 },
            ],
        )
        .unwrap()
    }

    fn intra(d: usize) -> UserEmbedding {
        UserEmbedding { placement: vec![DcId(d); 3], paths: vec![vec![], vec![]] }
    }

    #[test]
    fn vacuous_and_intra() {
        let n = net(10.0);
        let rep = validate_deployment(&n, &[], &[], &Deployment::new(&n, &[], &[], vec![])).unwrap();
        assert!(rep.feasible());
        let apps = [Application::chain("c", &["f"], 1.0).unwrap()];
        let users = [User { id: 0, app: AppId(0), dc: DcId(1), demand: 3.0 }];
        let dep = Deployment::new(&n, &apps, &users, vec![Some(intra(1))]);
        assert!(validate_deployment(&n, &apps, &users, &dep).unwrap().feasible());
    }

    #[test]
    fn exactly_one_capacity_violation() {
        let n = net(5.0);
        let apps = [Application::chain("c", &["f"], 1.0).unwrap()];
        let users = [
            User { id: 0, app: AppId(0), dc: DcId(0), demand: 3.0 },
            User { id: 1, app: AppId(0), dc: DcId(0), demand: 3.0 },
        ];
        let dep = Deployment::new(&n, &apps, &users, vec![Some(intra(0)), Some(intra(0))]);
        let rep = validate_deployment(&n, &apps, &users, &dep).unwrap();
        assert_eq!(rep.violations.len(), 1);
        assert!(matches!(rep.violations[0], Violation::DcCapacity { dc: DcId(0), .. }));
    }

    #[test]
    fn reports_every_violation() {
        let n = net(10.0);
        let apps = [Application::chain("c", &["f", "g"], 1.0).unwrap()];
        let users = [User { id: 0, app: AppId(0), dc: DcId(0), demand: 1.0 }];
        // Wrong root, f->g path loops a->b->a, latency 4 > 1.
        let emb = UserEmbedding {
            placement: vec![DcId(1), DcId(0), DcId(0), DcId(0)],
            paths: vec![vec![], vec![ArcId(0), ArcId(1)], vec![]],
        };
        let dep = Deployment::new(&n, &apps, &users, vec![Some(emb)]);
        let rep = validate_deployment(&n, &apps, &users, &dep).unwrap();
        let kinds: Vec<_> = rep.violations.iter().map(std::mem::discriminant).collect();
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::UserLocation { .. })));
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::BrokenChain { .. })));
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::PathLoop { .. })));
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::Latency { .. })));
        assert!(kinds.len() >= 4);
    }

    #[test]
    fn dangling_reference_is_structural() {
        let n = net(10.0);
        let apps = [Application::chain("c", &["f"], 1.0).unwrap()];
        let users = [User { id: 0, app: AppId(0), dc: DcId(0), demand: 1.0 }];
        let mut emb = intra(0);
        emb.paths[0] = vec![ArcId(99)];
        let dep = Deployment { embeddings: vec![Some(emb)], ..Deployment::new(&n, &apps, &users, vec![None]) };
        assert!(matches!(validate_deployment(&n, &apps, &users, &dep), Err(Error::Structural(_))));
    }
}
