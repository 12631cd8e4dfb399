use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AppId, Application, DcId, DemandSet, Layer, SubstrateNetwork, User};

/// How entry DCs are drawn among the edge DCs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryDistribution {
    Uniform,
    /// Truncated Zipf with exponent `a` over a seeded ranking of edge DCs.
    Zipf {
        a: f64,
    },
}

impl Default for EntryDistribution {
    fn default() -> Self {
        EntryDistribution::Zipf { a: 1.2 }
    }
}

/// Per-user demand in ADU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandSpec {
    Constant(f64),
    Uniform { low: f64, high: f64 },
}

impl Default for DemandSpec {
    fn default() -> Self {
        DemandSpec::Uniform { low: 0.5, high: 1.5 }
    }
}

impl DemandSpec {
    /// Largest demand this spec can draw.
    pub fn max(&self) -> f64 {
        match *self {
            DemandSpec::Constant(d) => d,
            DemandSpec::Uniform { high, .. } => high,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserSpec {
    pub count: usize,
    pub distribution: EntryDistribution,
    pub demand: DemandSpec,
}

impl Default for UserSpec {
    fn default() -> Self {
        UserSpec { count: 1000, distribution: EntryDistribution::default(), demand: DemandSpec::default() }
    }
}

/// Edge DCs in the order used for Zipf ranks: a seeded permutation.
pub fn ranked_edge_dcs(net: &SubstrateNetwork, seed: u64) -> Vec<DcId> {
    let mut edge: Vec<DcId> = net.real_dcs().filter(|&d| net.dc(d).layer == Layer::Edge).collect();
    edge.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    edge
}

/// Draws `spec.count` users. Each picks an application uniformly from
/// `apps`, an entry DC from the configured distribution and a demand.
pub fn generate_users(net: &SubstrateNetwork, apps: &[Application], spec: &UserSpec, seed: u64) -> Result<DemandSet> {
    if spec.count == 0 {
        return DemandSet::new(Vec::new(), net, apps);
    }
    if apps.is_empty() {
        return Err(Error::Harness("users need at least one application".into()));
    }
    let ranked = ranked_edge_dcs(net, seed ^ 0x5eed);
    if ranked.is_empty() {
        return Err(Error::Harness("the network has no edge DC for users to enter at".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = match spec.distribution {
        EntryDistribution::Uniform => None,
        EntryDistribution::Zipf { a } => {
            Some(Zipf::new(ranked.len() as u64, a).map_err(|e| Error::Harness(format!("bad Zipf exponent {a}: {e}")))?)
        }
    };
    let demand = match spec.demand {
        DemandSpec::Constant(x) if x > 0.0 && x.is_finite() => None,
        DemandSpec::Uniform { low, high } if 0.0 < low && low <= high && high.is_finite() => {
            Some(Uniform::new_inclusive(low, high))
        }
        other => return Err(Error::Harness(format!("invalid demand distribution {other:?}"))),
    };
    let users = (0..spec.count)
        .map(|i| {
            let app = AppId(rng.gen_range(0..apps.len()));
            let rank = match &zipf {
                None => rng.gen_range(0..ranked.len()),
                Some(z) => z.sample(&mut rng) as usize - 1,
            };
            let dem = match (&demand, spec.demand) {
                (Some(u), _) => u.sample(&mut rng),
                (None, DemandSpec::Constant(x)) => x,
                (None, _) => unreachable!(),
            };
            User { id: i as u64, app, dc: ranked[rank], demand: dem }
        })
        .collect();
    DemandSet::new(users, net, apps)
}
