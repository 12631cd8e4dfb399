use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::application::{Application, FnId, LogicalLinkId};
use super::demand::User;
use super::network::{ArcId, DcId, SubstrateNetwork};

/// One accepted user's placement and steering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEmbedding {
    /// Host DC per function index (index 0 is the user's entry DC).
    pub placement: Vec<DcId>,
    /// Directed arcs per logical link; an empty path means intra-DC.
    pub paths: Vec<Vec<ArcId>>,
}

impl UserEmbedding {
    pub fn host(&self, f: FnId) -> DcId {
        self.placement[f.0]
    }

    pub fn path(&self, e: LogicalLinkId) -> &[ArcId] {
        &self.paths[e.0]
    }
}

/// Resources consumed by accepted users.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Ledger {
    pub dc_ecu: Vec<f64>,
    pub link_bwu: Vec<f64>,
}

impl Ledger {
    pub fn zeros(net: &SubstrateNetwork) -> Self {
        Ledger { dc_ecu: vec![0.0; net.num_dcs()], link_bwu: vec![0.0; net.num_links()] }
    }

    pub fn charge(&mut self, net: &SubstrateNetwork, app: &Application, emb: &UserEmbedding, demand: f64) {
        for f in app.vnfs() {
            let d = emb.host(f);
            self.dc_ecu[d.0] += app.xi_node(f, d) * demand;
        }
        for e in app.link_ids() {
            for &a in emb.path(e) {
                let l = net.arc(a).link;
                self.link_bwu[l.0] += app.xi_link(e, l) * demand;
            }
        }
    }

    /// Recomputes the ledger from scratch, visiting users in index order.
    pub fn compute(
        net: &SubstrateNetwork,
        apps: &[Application],
        users: &[User],
        embeddings: &[Option<UserEmbedding>],
    ) -> Self {
        let mut ledger = Ledger::zeros(net);
        for (u, emb) in users.iter().zip(embeddings) {
            if let Some(emb) = emb {
                ledger.charge(net, &apps[u.app.0], emb, u.demand);
            }
        }
        ledger
    }
}

/// An integral deployment: every user is either embedded or rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Deployment {
    /// Indexed like the user list the deployment was built for.
    pub embeddings: Vec<Option<UserEmbedding>>,
    pub rejected: BTreeSet<usize>,
    pub ledger: Ledger,
}

impl Deployment {
    pub fn new(
        net: &SubstrateNetwork,
        apps: &[Application],
        users: &[User],
        embeddings: Vec<Option<UserEmbedding>>,
    ) -> Self {
        let rejected = embeddings.iter().enumerate().filter(|(_, e)| e.is_none()).map(|(i, _)| i).collect();
        let ledger = Ledger::compute(net, apps, users, &embeddings);
        Deployment { embeddings, rejected, ledger }
    }

    pub fn num_accepted(&self) -> usize {
        self.embeddings.iter().filter(|e| e.is_some()).count()
    }

    pub fn num_rejected(&self) -> usize {
        self.rejected.len()
    }
}

/// Total cost with sink accounting: real and sink placements plus the
/// full-sink price of every rejected user.
pub fn deployment_cost(net: &SubstrateNetwork, apps: &[Application], users: &[User], dep: &Deployment) -> f64 {
    let mut cost = deployed_cost(net, dep);
    if let Some(s) = net.sink() {
        let c = net.dc(s).cost;
        for &u in &dep.rejected {
            let user = &users[u];
            cost += user.demand * apps[user.app.0].sink_ecu_per_adu() * c;
        }
    }
    cost
}

/// Cost of the resources held by accepted users only.
pub fn deployed_cost(net: &SubstrateNetwork, dep: &Deployment) -> f64 {
    let node: f64 = dep.ledger.dc_ecu.iter().zip(net.dcs()).map(|(x, d)| x * d.cost).sum();
    let link: f64 = dep.ledger.link_bwu.iter().zip(net.links()).map(|(x, l)| x * l.cost).sum();
    node + link
}
