use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a data center inside a [`SubstrateNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DcId(pub usize);

/// Index of an undirected substrate link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub usize);

/// Index of a directed arc. Link `k` owns arcs `2k` (a -> b) and `2k + 1` (b -> a).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArcId(pub usize);

impl fmt::Display for DcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dc#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Edge,
    Transport,
    Core,
    Sink,
}

impl Layer {
    pub const REAL: [Layer; 3] = [Layer::Edge, Layer::Transport, Layer::Core];

    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Edge => "edge",
            Layer::Transport => "transport",
            Layer::Core => "core",
            Layer::Sink => "sink",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dc {
    pub name: String,
    /// ECU; `f64::INFINITY` means unbounded.
    pub capacity: f64,
    pub cost: f64,
    pub layer: Layer,
    pub geo: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: DcId,
    pub b: DcId,
    /// BWU; `f64::INFINITY` means unbounded.
    pub capacity: f64,
    pub cost: f64,
    pub latency: f64,
}

impl Link {
    pub fn other(&self, end: DcId) -> DcId {
        if end == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub from: DcId,
    pub to: DcId,
    pub link: LinkId,
}

/// Weighted undirected graph of data centers.
///
/// Each undirected link is stored once and exposed as two directed arcs that
/// share its capacity and cost budget. Arcs leaving the rejection sink are
/// never usable and are left out of the adjacency lists.
#[derive(Debug, Clone)]
pub struct SubstrateNetwork {
    dcs: Vec<Dc>,
    links: Vec<Link>,
    arcs: Vec<Arc>,
    out_arcs: Vec<Vec<ArcId>>,
    pairs: HashMap<(DcId, DcId), LinkId>,
    sink: Option<DcId>,
}

impl SubstrateNetwork {
    /// Builds and validates a network. A DC tagged [`Layer::Sink`] is treated
    /// as the rejection sink and must satisfy the sink invariants.
    pub fn new(dcs: Vec<Dc>, links: Vec<Link>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidNetwork(msg));
        let mut sink = None;
        for (i, dc) in dcs.iter().enumerate() {
            if dc.capacity.is_nan() || dc.capacity < 0.0 {
                return invalid(format!("DC `{}` has negative or NaN capacity", dc.name));
            }
            if !dc.cost.is_finite() || dc.cost < 0.0 {
                return invalid(format!("DC `{}` has negative or non-finite cost", dc.name));
            }
            if let Some((x, y)) = dc.geo {
                if !x.is_finite() || !y.is_finite() {
                    return invalid(format!("DC `{}` has non-finite coordinates", dc.name));
                }
            }
            if dc.layer == Layer::Sink {
                if sink.is_some() {
                    return invalid("more than one sink DC".into());
                }
                if dc.capacity != f64::INFINITY {
                    return invalid(format!("sink DC `{}` must have unbounded capacity", dc.name));
                }
                sink = Some(DcId(i));
            }
        }
        let mut names = HashMap::new();
        for (i, dc) in dcs.iter().enumerate() {
            if names.insert(dc.name.as_str(), i).is_some() {
                return invalid(format!("duplicate DC id `{}`", dc.name));
            }
        }

        let mut pairs = HashMap::new();
        let mut arcs = Vec::with_capacity(links.len() * 2);
        let mut out_arcs = vec![Vec::new(); dcs.len()];
        for (k, link) in links.iter().enumerate() {
            if link.a.0 >= dcs.len() || link.b.0 >= dcs.len() {
                return invalid(format!("link #{k} references an unknown DC"));
            }
            if link.a == link.b {
                return invalid(format!("link #{k} is a self-loop on `{}`", dcs[link.a.0].name));
            }
            if link.capacity.is_nan() || link.capacity < 0.0 {
                return invalid(format!("link #{k} has negative or NaN capacity"));
            }
            if !link.cost.is_finite() || link.cost < 0.0 {
                return invalid(format!("link #{k} has negative or non-finite cost"));
            }
            if !link.latency.is_finite() || link.latency < 0.0 {
                return invalid(format!("link #{k} has negative or non-finite latency"));
            }
            let key = ordered(link.a, link.b);
            if pairs.insert(key, LinkId(k)).is_some() {
                return invalid(format!(
                    "duplicate link between `{}` and `{}`",
                    dcs[link.a.0].name, dcs[link.b.0].name
                ));
            }
            let touches_sink = Some(link.a) == sink || Some(link.b) == sink;
            if touches_sink && (link.capacity != f64::INFINITY || link.cost != 0.0 || link.latency != 0.0) {
                return invalid(format!("sink link #{k} must be unbounded with zero cost and latency"));
            }
            let fwd = Arc { from: link.a, to: link.b, link: LinkId(k) };
            let bwd = Arc { from: link.b, to: link.a, link: LinkId(k) };
            for (j, arc) in [fwd, bwd].into_iter().enumerate() {
                if Some(arc.from) != sink {
                    out_arcs[arc.from.0].push(ArcId(2 * k + j));
                }
                arcs.push(arc);
            }
        }
        for list in &mut out_arcs {
            list.sort_by_key(|a| (arcs[a.0].to, a.0));
        }

        let net = SubstrateNetwork { dcs, links, arcs, out_arcs, pairs, sink };
        if let Some(s) = sink {
            for d in net.real_dcs() {
                if net.link_between(d, s).is_none() {
                    return invalid(format!("sink is not linked to DC `{}`", net.dc(d).name));
                }
            }
        }
        if !net.real_connected() {
            return invalid("the substrate graph is not connected".into());
        }
        Ok(net)
    }

    fn real_connected(&self) -> bool {
        let real: Vec<DcId> = self.real_dcs().collect();
        let Some(&start) = real.first() else {
            return true;
        };
        let mut seen = vec![false; self.dcs.len()];
        let mut stack = vec![start];
        seen[start.0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &a in &self.out_arcs[v.0] {
                let w = self.arcs[a.0].to;
                if !seen[w.0] && Some(w) != self.sink {
                    seen[w.0] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == real.len()
    }

    pub fn num_dcs(&self) -> usize {
        self.dcs.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn dcs(&self) -> &[Dc] {
        &self.dcs
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn dc(&self, id: DcId) -> &Dc {
        &self.dcs[id.0]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id.0]
    }

    pub fn dc_ids(&self) -> impl Iterator<Item = DcId> + Clone {
        (0..self.dcs.len()).map(DcId)
    }

    /// All DCs except the rejection sink.
    pub fn real_dcs(&self) -> impl Iterator<Item = DcId> + '_ {
        self.dc_ids().filter(move |&d| Some(d) != self.sink)
    }

    pub fn num_real_dcs(&self) -> usize {
        self.dcs.len() - usize::from(self.sink.is_some())
    }

    /// Usable arcs leaving `d`, ordered by destination id.
    pub fn out_arcs(&self, d: DcId) -> &[ArcId] {
        &self.out_arcs[d.0]
    }

    pub fn link_between(&self, m: DcId, n: DcId) -> Option<LinkId> {
        self.pairs.get(&ordered(m, n)).copied()
    }

    pub fn arc_between(&self, m: DcId, n: DcId) -> Option<ArcId> {
        let link = self.link_between(m, n)?;
        let base = 2 * link.0;
        Some(if self.arcs[base].from == m { ArcId(base) } else { ArcId(base + 1) })
    }

    pub fn sink(&self) -> Option<DcId> {
        self.sink
    }

    pub fn is_sink(&self, d: DcId) -> bool {
        self.sink == Some(d)
    }

    pub fn is_sink_link(&self, l: LinkId) -> bool {
        let link = &self.links[l.0];
        self.is_sink(link.a) || self.is_sink(link.b)
    }

    pub fn dc_by_name(&self, name: &str) -> Option<DcId> {
        self.dcs.iter().position(|d| d.name == name).map(DcId)
    }

    /// Highest per-ECU cost over real DCs (0 for an empty network).
    pub fn max_real_cost(&self) -> f64 {
        self.real_dcs().map(|d| self.dcs[d.0].cost).fold(0.0, f64::max)
    }

    pub fn has_geo(&self) -> bool {
        self.real_dcs().all(|d| self.dcs[d.0].geo.is_some())
    }

    pub(crate) fn push_sink(&mut self, dc: Dc) -> DcId {
        let s = DcId(self.dcs.len());
        self.dcs.push(dc);
        self.out_arcs.push(Vec::new());
        for d in 0..s.0 {
            let k = self.links.len();
            self.links.push(Link { a: DcId(d), b: s, capacity: f64::INFINITY, cost: 0.0, latency: 0.0 });
            self.arcs.push(Arc { from: DcId(d), to: s, link: LinkId(k) });
            self.arcs.push(Arc { from: s, to: DcId(d), link: LinkId(k) });
            self.out_arcs[d].push(ArcId(2 * k));
            self.pairs.insert(ordered(DcId(d), s), LinkId(k));
        }
        self.sink = Some(s);
        s
    }
}

fn ordered(a: DcId, b: DcId) -> (DcId, DcId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn dc(name: &str, cost: f64) -> Dc {
        Dc { name: name.into(), capacity: 10.0, cost, layer: Layer::Edge, geo: None }
    }

    fn link(a: usize, b: usize) -> Link {
        Link { a: DcId(a), b: DcId(b), capacity: 5.0, cost: 1.0, latency: 1.0 }
    }

    #[test]
    fn arcs_come_in_pairs() {
        let net = SubstrateNetwork::new(vec![dc("a", 1.0), dc("b", 2.0)], vec![link(0, 1)]).unwrap();
        assert_eq!(net.num_arcs(), 2);
        assert_eq!(net.arc_between(DcId(1), DcId(0)), Some(ArcId(1)));
        assert_eq!(net.out_arcs(DcId(0)), &[ArcId(0)]);
    }

    #[test]
    fn rejects_dangling_duplicate_and_loops() {
        let dcs = vec![dc("a", 1.0), dc("b", 1.0)];
        assert!(SubstrateNetwork::new(dcs.clone(), vec![link(0, 2)]).is_err());
        assert!(SubstrateNetwork::new(dcs.clone(), vec![link(0, 0)]).is_err());
        assert!(SubstrateNetwork::new(dcs.clone(), vec![link(0, 1), link(1, 0)]).is_err());
        assert!(SubstrateNetwork::new(dcs, vec![]).is_err(), "disconnected");
    }

    #[test]
    fn rejects_negative_values() {
        let mut l = link(0, 1);
        l.latency = -1.0;
        assert!(SubstrateNetwork::new(vec![dc("a", 1.0), dc("b", 1.0)], vec![l]).is_err());
        assert!(SubstrateNetwork::new(vec![dc("a", -1.0)], vec![]).is_err());
    }
}
