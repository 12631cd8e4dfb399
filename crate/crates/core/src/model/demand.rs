use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::application::{AppId, Application};
use super::network::{DcId, SubstrateNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: u64,
    pub app: AppId,
    pub dc: DcId,
    /// ADU; strictly positive.
    pub demand: f64,
}

/// Aggregated demand keyed by (application, entry DC).
pub type Aggregate = BTreeMap<(AppId, DcId), f64>;

#[derive(Debug, Clone, Default)]
pub struct DemandSet {
    users: Vec<User>,
    aggregate: Aggregate,
}

impl DemandSet {
    pub fn new(users: Vec<User>, net: &SubstrateNetwork, apps: &[Application]) -> Result<Self> {
        for u in &users {
            if !(u.demand > 0.0 && u.demand.is_finite()) {
                return Err(Error::InvalidDemand(format!("user {} has demand {}", u.id, u.demand)));
            }
            if u.app.0 >= apps.len() {
                return Err(Error::InvalidDemand(format!("user {} references unknown app", u.id)));
            }
            if u.dc.0 >= net.num_dcs() || net.is_sink(u.dc) {
                return Err(Error::InvalidDemand(format!("user {} enters at an unknown or sink DC", u.id)));
            }
        }
        let aggregate = aggregate_demand(&users);
        Ok(DemandSet { users, aggregate })
    }

    pub fn users(&self) -> &[User] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn aggregate(&self) -> &Aggregate {
        &self.aggregate
    }

    pub fn total_demand(&self) -> f64 {
        self.aggregate.values().sum()
    }

    /// Same users in a new order; the aggregate is unchanged.
    pub fn reordered(&self, order: &[usize]) -> DemandSet {
        DemandSet { users: order.iter().map(|&i| self.users[i]).collect(), aggregate: self.aggregate.clone() }
    }
}

/// Sums demand per (application, DC). Values are added in sorted order so
/// the result does not depend on the order of `users`.
pub fn aggregate_demand(users: &[User]) -> Aggregate {
    let mut groups: BTreeMap<(AppId, DcId), Vec<f64>> = BTreeMap::new();
    for u in users {
        groups.entry((u.app, u.dc)).or_default().push(u.demand);
    }
    groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by(f64::total_cmp);
            (k, v.iter().sum())
        })
        .collect()
}
