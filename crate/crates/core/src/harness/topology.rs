use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dc, DcId, Layer, Link, SubstrateNetwork};

/// Capacity and per-unit cost of one DC layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub capacity: f64,
    pub cost: f64,
}

/// Per-layer resources applied to generated networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Resources {
    pub edge: LayerSpec,
    pub transport: LayerSpec,
    pub core: LayerSpec,
    pub link_capacity: f64,
    pub link_cost: f64,
    /// Multiplies every DC and link capacity.
    pub capacity_scale: f64,
}

impl Default for Resources {
    fn default() -> Self {
        Resources {
            edge: LayerSpec { capacity: 200_000.0, cost: 50.0 },
            transport: LayerSpec { capacity: 800_000.0, cost: 10.0 },
            core: LayerSpec { capacity: 2_500_000.0, cost: 1.0 },
            link_capacity: 200_000.0,
            link_cost: 1.0,
            capacity_scale: 1.0,
        }
    }
}

impl Resources {
    fn layer(&self, layer: Layer) -> LayerSpec {
        match layer {
            Layer::Edge | Layer::Sink => self.edge,
            Layer::Transport => self.transport,
            Layer::Core => self.core,
        }
    }

    fn dc(&self, name: String, layer: Layer) -> Dc {
        let spec = self.layer(layer);
        Dc { name, capacity: spec.capacity * self.capacity_scale, cost: spec.cost, layer, geo: None }
    }

    fn link(&self, a: usize, b: usize, latency: f64) -> Link {
        Link {
            a: DcId(a),
            b: DcId(b),
            capacity: self.link_capacity * self.capacity_scale,
            cost: self.link_cost,
            latency,
        }
    }
}

/// Connected G(n, m) graph. Edge sets are drawn uniformly and redrawn until
/// connected. The ⌈n/5⌉ highest-degree nodes (ties to the lower id) form the
/// core layer; the rest are edge DCs. Every link has latency `latency`.
pub fn generate_random_topology(
    n: usize,
    m: usize,
    seed: u64,
    resources: &Resources,
    latency: f64,
) -> Result<SubstrateNetwork> {
    if n == 0 {
        return Err(Error::Harness("a random topology needs at least one node".into()));
    }
    if m + 1 < n {
        return Err(Error::Harness(format!("{m} links cannot connect {n} nodes")));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    if m > pairs.len() {
        return Err(Error::Harness(format!("{n} nodes admit at most {} links, asked for {m}", pairs.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges;
    let mut tries = 0usize;
    loop {
        edges = pairs.choose_multiple(&mut rng, m).copied().collect::<Vec<_>>();
        if connected(n, &edges) {
            break;
        }
        tries += 1;
        if tries > 1_000_000 {
            return Err(Error::Harness(format!("no connected G({n}, {m}) found")));
        }
    }
    edges.sort_unstable();

    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by(|&x, &y| degree[y].cmp(&degree[x]).then(x.cmp(&y)));
    let core: BTreeSet<usize> = by_degree[..n.div_ceil(5)].iter().copied().collect();
    let dcs = (0..n)
        .map(|i| {
            let layer = if core.contains(&i) { Layer::Core } else { Layer::Edge };
            resources.dc(format!("n{i}"), layer)
        })
        .collect();
    let links = edges.iter().map(|&(a, b)| resources.link(a, b, latency)).collect();
    SubstrateNetwork::new(dcs, links)
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut parts = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            parts -= 1;
        }
    }
    parts == 1
}

/// Shape and latencies of a layered edge/transport/core network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchySpec {
    pub edge: usize,
    pub transport: usize,
    pub core: usize,
    /// Total link count; links beyond the uplink tree are lateral links
    /// between DCs of the same layer and group. `None` keeps the tree only.
    pub links: Option<usize>,
    pub intra_latency: f64,
    pub edge_transport_latency: f64,
    pub transport_core_latency: f64,
}

impl Default for HierarchySpec {
    fn default() -> Self {
        HierarchySpec {
            edge: 72,
            transport: 4,
            core: 2,
            links: Some(100),
            intra_latency: 1.0,
            edge_transport_latency: 5.0,
            transport_core_latency: 10.0,
        }
    }
}

/// Edge DCs uplink to transport DCs in contiguous groups, transport DCs to
/// core DCs the same way (edge straight to core when there is no transport
/// layer), core DCs form a ring, then lateral links are drawn inside groups.
pub fn generate_hierarchical_topology(
    spec: &HierarchySpec,
    seed: u64,
    resources: &Resources,
) -> Result<SubstrateNetwork> {
    if spec.edge == 0 || spec.core == 0 {
        return Err(Error::Harness("a hierarchy needs at least one edge and one core DC".into()));
    }
    let mut dcs = Vec::new();
    let mut push = |prefix: &str, count: usize, layer: Layer| -> Vec<usize> {
        (0..count)
            .map(|i| {
                dcs.push(resources.dc(format!("{prefix}{i}"), layer));
                dcs.len() - 1
            })
            .collect()
    };
    let edge = push("e", spec.edge, Layer::Edge);
    let transport = push("t", spec.transport, Layer::Transport);
    let core = push("c", spec.core, Layer::Core);

    let mut pairs = BTreeSet::new();
    let mut links = Vec::new();
    let mut add = |a: usize, b: usize, latency: f64, links: &mut Vec<Link>| {
        let key = (a.min(b), a.max(b));
        if a != b && pairs.insert(key) {
            links.push(resources.link(key.0, key.1, latency));
        }
    };
    let group = |i: usize, from: usize, to: usize| i * to / from;
    // group id per DC for lateral links
    let mut gid = vec![0usize; dcs.len()];
    if transport.is_empty() {
        let lat = spec.edge_transport_latency + spec.transport_core_latency;
        for (i, &e) in edge.iter().enumerate() {
            let g = group(i, edge.len(), core.len());
            gid[e] = g;
            add(e, core[g], lat, &mut links);
        }
    } else {
        for (i, &e) in edge.iter().enumerate() {
            let g = group(i, edge.len(), transport.len());
            gid[e] = g;
            add(e, transport[g], spec.edge_transport_latency, &mut links);
        }
        for (i, &t) in transport.iter().enumerate() {
            let g = group(i, transport.len(), core.len());
            gid[t] = g;
            add(t, core[g], spec.transport_core_latency, &mut links);
        }
    }
    for i in 1..core.len() {
        add(core[i - 1], core[i], spec.intra_latency, &mut links);
    }
    if core.len() > 2 {
        add(core[core.len() - 1], core[0], spec.intra_latency, &mut links);
    }

    if let Some(target) = spec.links {
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        for layer in [&edge, &transport] {
            for (x, &a) in layer.iter().enumerate() {
                for &b in &layer[x + 1..] {
                    if gid[a] == gid[b] {
                        candidates.push((a, b));
                    }
                }
            }
        }
        if links.len() > target {
            return Err(Error::Harness(format!("the uplink tree alone has {} links, above {target}", links.len())));
        }
        let need = target - links.len();
        if need > candidates.len() {
            return Err(Error::Harness(format!("only {} lateral links are possible, {need} needed", candidates.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<(usize, usize)> = candidates.choose_multiple(&mut rng, need).copied().collect();
        picked.sort_unstable();
        for (a, b) in picked {
            add(a, b, spec.intra_latency, &mut links);
        }
    }
    SubstrateNetwork::new(dcs, links)
}

/// Named topologies. The random-graph presets reuse only the node and link
/// counts; `citta-studi` in particular is not the measured network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[serde(rename = "40N60E")]
    N40E60,
    #[serde(rename = "100N150E")]
    N100E150,
    CittaStudi,
    #[serde(rename = "5gen-like")]
    FiveGenLike,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::N40E60 => "40N60E",
            Preset::N100E150 => "100N150E",
            Preset::CittaStudi => "citta-studi",
            Preset::FiveGenLike => "5gen-like",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "40n60e" => Ok(Preset::N40E60),
            "100n150e" => Ok(Preset::N100E150),
            "citta-studi" | "cittastudi" => Ok(Preset::CittaStudi),
            "5gen-like" | "5gen" => Ok(Preset::FiveGenLike),
            _ => Err(Error::Harness(format!("unknown preset `{s}`"))),
        }
    }

    /// Whether this preset is a stand-in built from counts only.
    pub fn authentic(self) -> bool {
        !matches!(self, Preset::CittaStudi)
    }

    pub fn build(self, seed: u64, resources: &Resources) -> Result<SubstrateNetwork> {
        match self {
            Preset::N40E60 => generate_random_topology(40, 60, seed, resources, 1.0),
            Preset::N100E150 => generate_random_topology(100, 150, seed, resources, 1.0),
            Preset::CittaStudi => generate_random_topology(30, 35, seed, resources, 1.0),
            Preset::FiveGenLike => generate_hierarchical_topology(&HierarchySpec::default(), seed, resources),
        }
    }
}

/// Random seeds for generators that need one per repetition.
pub(crate) fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.gen()
}
