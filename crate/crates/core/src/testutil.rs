//! Small instance builders shared by unit tests.

use crate::latency::{LatencyTables, RestrictionMode};
use crate::model::{
    add_rejection_sink, Aggregate, AppId, Application, Dc, DcId, DemandSet, EdgeSpec, Layer, Link, SubstrateNetwork,
    User, DEFAULT_PENALTY,
};

pub const INF: f64 = f64::INFINITY;

/// `dcs`: (capacity, cost); `links`: (a, b, capacity, cost, latency).
pub fn network(dcs: &[(f64, f64)], links: &[(usize, usize, f64, f64, f64)]) -> SubstrateNetwork {
    let dcs = dcs
        .iter()
        .enumerate()
        .map(|(i, &(capacity, cost))| Dc { name: format!("d{i}"), capacity, cost, layer: Layer::Edge, geo: None })
        .collect();
    let links = links
        .iter()
        .map(|&(a, b, capacity, cost, latency)| Link { a: DcId(a), b: DcId(b), capacity, cost, latency })
        .collect();
    SubstrateNetwork::new(dcs, links).unwrap()
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub net: SubstrateNetwork,
    pub apps: Vec<Application>,
    pub users: DemandSet,
    pub tables: LatencyTables,
}

impl Instance {
    pub fn aggregate(&self) -> &Aggregate {
        self.users.aggregate()
    }
}

/// Adds the sink, computes shortest-path restrictions and builds users
/// from (app, dc, demand).
pub fn instance(net: SubstrateNetwork, apps: Vec<Application>, users: &[(usize, usize, f64)]) -> Instance {
    let (net, apps) = add_rejection_sink(&net, &apps, DEFAULT_PENALTY).unwrap();
    let users = users
        .iter()
        .enumerate()
        .map(|(i, &(a, d, demand))| User { id: i as u64, app: AppId(a), dc: DcId(d), demand })
        .collect();
    let users = DemandSet::new(users, &net, &apps).unwrap();
    let tables = LatencyTables::compute(&net, RestrictionMode::ShortestPath).unwrap();
    Instance { net, apps, users, tables }
}

/// Random connected instance of 3 to 5 DCs with one chain app and sometimes a
/// tree app; capacities and demands are multiplied by `scale`.
pub fn random_instance(seed: u64, scale: f64) -> Instance {
    random_instance_with(seed, scale, 5)
}

pub fn random_instance_with(seed: u64, scale: f64, max_users: u64) -> Instance {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407) | 1;
    let mut next = move |m: u64| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state % m
    };
    let n = 3 + next(3) as usize;
    let dcs: Vec<(f64, f64)> = (0..n).map(|_| ((next(6) as f64) * scale, 1.0 + next(5) as f64)).collect();
    let mut links = Vec::new();
    for v in 1..n {
        links.push((next(v as u64) as usize, v, (next(5) as f64) * scale, next(3) as f64, 1.0 + next(2) as f64));
    }
    for _ in 0..next(3) {
        let (a, b) = (next(n as u64) as usize, next(n as u64) as usize);
        if a != b && !links.iter().any(|l| (l.0, l.1) == (a, b) || (l.0, l.1) == (b, a)) {
            links.push((a, b, (next(5) as f64) * scale, next(3) as f64, 1.0 + next(2) as f64));
        }
    }
    let net = network(&dcs, &links);
    let mut apps = vec![Application::chain("a", &["f1", "f2"], INF).unwrap()];
    if next(2) == 1 {
        let tree = Application::new(
            "t",
            &["x", "y", "z"],
            &[EdgeSpec::new("U", "x", INF), EdgeSpec::new("x", "y", 2.0), EdgeSpec::new("x", "z", INF)],
            1.0,
            1.0,
        )
        .unwrap();
        apps.push(tree);
    }
    let users: Vec<(usize, usize, f64)> = (0..1 + next(max_users))
        .map(|_| (next(apps.len() as u64) as usize, next(n as u64) as usize, (1.0 + next(4) as f64) * scale))
        .collect();
    instance(net, apps, &users)
}
