#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pranos::latency::{LatencyTables, RestrictionMode};
use pranos::model::{
    add_rejection_sink, AppId, Application, Dc, DcId, DemandSet, EdgeSpec, Layer, Link, SubstrateNetwork, User,
    DEFAULT_PENALTY,
};

pub const INF: f64 = f64::INFINITY;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct Instance {
    pub net: SubstrateNetwork,
    pub apps: Vec<Application>,
    pub users: DemandSet,
    pub tables: LatencyTables,
}

#[derive(Clone, Copy)]
pub struct Shape {
    pub dcs: (usize, usize),
    pub max_links: usize,
    pub max_users: usize,
    /// Upper end of the DC and link capacity draws.
    pub capacity: f64,
}

pub const SMALL: Shape = Shape { dcs: (2, 6), max_links: 10, max_users: 12, capacity: 6.0 };
pub const MEDIUM: Shape = Shape { dcs: (4, 12), max_links: 24, max_users: 80, capacity: 30.0 };

/// Connected graph with integer latencies and coordinates; no sink.
pub fn random_network(r: &mut ChaCha8Rng, n: usize, max_links: usize, capacity: f64) -> SubstrateNetwork {
    let dcs = (0..n)
        .map(|i| Dc {
            name: format!("d{i}"),
            capacity: f64::from(r.gen_range(0..=capacity as u32)),
            cost: f64::from(r.gen_range(1..=5u32)),
            layer: if i % 3 == 0 { Layer::Core } else { Layer::Edge },
            geo: Some((f64::from(r.gen_range(0..5u32)), f64::from(r.gen_range(0..5u32)))),
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|v| (r.gen_range(0..v), v)).collect();
    let mut extra: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|p| !pairs.contains(p)).collect();
    extra.shuffle(r);
    let room = max_links.saturating_sub(pairs.len());
    let take = if room == 0 { 0 } else { r.gen_range(0..=room.min(extra.len())) };
    pairs.extend(extra.into_iter().take(take));
    let links = pairs
        .into_iter()
        .map(|(a, b)| Link {
            a: DcId(a),
            b: DcId(b),
            capacity: f64::from(r.gen_range(0..=capacity as u32)),
            cost: f64::from(r.gen_range(0..=3u32)),
            latency: f64::from(r.gen_range(1..=3u32)),
        })
        .collect();
    SubstrateNetwork::new(dcs, links).unwrap()
}

fn bound(r: &mut ChaCha8Rng) -> f64 {
    if r.gen_bool(0.5) {
        INF
    } else {
        f64::from(r.gen_range(0..=4u32))
    }
}

pub fn random_app(r: &mut ChaCha8Rng, name: &str) -> Application {
    match r.gen_range(0..3) {
        0 => {
            let vnfs: Vec<String> = (0..r.gen_range(1..=3)).map(|i| format!("f{i}")).collect();
            let vnfs: Vec<&str> = vnfs.iter().map(String::as_str).collect();
            let mut app = Application::chain(name, &vnfs, INF).unwrap();
            for e in app.link_ids().collect::<Vec<_>>() {
                let b = bound(r);
                app.set_latency_bound(e, b);
            }
            app
        }
        1 => Application::new(
            name,
            &["x", "y", "z"],
            &[EdgeSpec::new("U", "x", bound(r)), EdgeSpec::new("x", "y", bound(r)), EdgeSpec::new("x", "z", bound(r))],
            1.0,
            1.0,
        )
        .unwrap(),
        _ => Application::new(
            name,
            &["a", "b"],
            &[EdgeSpec::new("U", "a", bound(r)), EdgeSpec::new("a", "b", bound(r))],
            f64::from(r.gen_range(1..=2u32)),
            f64::from(r.gen_range(0..=2u32)),
        )
        .unwrap(),
    }
}

pub fn random_instance(seed: u64, shape: Shape) -> Instance {
    let mut r = rng(seed);
    let n = r.gen_range(shape.dcs.0..=shape.dcs.1);
    let net = random_network(&mut r, n, shape.max_links, shape.capacity);
    let apps: Vec<Application> = (0..r.gen_range(1..=2)).map(|i| random_app(&mut r, &format!("app{i}"))).collect();
    let (net, apps) = add_rejection_sink(&net, &apps, DEFAULT_PENALTY).unwrap();
    let users: Vec<User> = (0..r.gen_range(0..=shape.max_users))
        .map(|i| User {
            id: i as u64,
            app: AppId(r.gen_range(0..apps.len())),
            dc: DcId(r.gen_range(0..n)),
            demand: f64::from(r.gen_range(1..=4u32)) * 0.5,
        })
        .collect();
    let users = DemandSet::new(users, &net, &apps).unwrap();
    let mode = if r.gen_bool(0.5) { RestrictionMode::ShortestPath } else { RestrictionMode::Cabdriver };
    let tables = LatencyTables::compute(&net, mode).unwrap();
    Instance { net, apps, users, tables }
}

pub fn shuffled(users: &DemandSet, seed: u64) -> DemandSet {
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.shuffle(&mut rng(seed));
    users.reordered(&order)
}

/// `a <= b` up to a relative tolerance.
pub fn le_rel(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * a.abs().max(b.abs()).max(1.0)
}
