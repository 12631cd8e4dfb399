use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Application, EdgeSpec, SubstrateNetwork};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyMode {
    /// No bound on any logical link.
    #[default]
    Relaxed,
    /// Neighbouring functions stay in one layer.
    Strict,
    /// The first application strict, the others relaxed.
    Mixed,
}

impl std::str::FromStr for LatencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relaxed" => Ok(LatencyMode::Relaxed),
            "strict" => Ok(LatencyMode::Strict),
            "mixed" => Ok(LatencyMode::Mixed),
            _ => Err(Error::Harness(format!("unknown latency mode `{s}`"))),
        }
    }
}

/// Applications used by generated scenarios: a chain of four VNFs and, when
/// two are asked for, a tree of four VNFs.
pub fn app_mix(count: usize) -> Result<Vec<Application>> {
    let inf = f64::INFINITY;
    let chain = Application::chain("chain", &["f1", "f2", "f3", "f4"], inf)?;
    match count {
        1 => Ok(vec![chain]),
        2 => {
            let tree = Application::new(
                "tree",
                &["g1", "g2", "g3", "g4"],
                &[
                    EdgeSpec::new("U", "g1", inf),
                    EdgeSpec::new("g1", "g2", inf),
                    EdgeSpec::new("g1", "g3", inf),
                    EdgeSpec::new("g3", "g4", inf),
                ],
                1.0,
                1.0,
            )?;
            Ok(vec![chain, tree])
        }
        n => Err(Error::Harness(format!("the app mix has 1 or 2 applications, not {n}"))),
    }
}

/// The two thresholds strict mode sits between: the largest latency of a
/// shortest path that stays inside one layer, and the smallest latency of a
/// link joining two layers (infinite when there is none).
pub fn layer_thresholds(net: &SubstrateNetwork) -> (f64, f64) {
    let mut inter_min = f64::INFINITY;
    for (i, l) in net.links().iter().enumerate() {
        if net.is_sink_link(crate::model::LinkId(i)) {
            continue;
        }
        if net.dc(l.a).layer != net.dc(l.b).layer {
            inter_min = inter_min.min(l.latency);
        }
    }
    let mut intra_max: f64 = 0.0;
    for s in net.real_dcs() {
        let layer = net.dc(s).layer;
        let mut dist = vec![f64::INFINITY; net.num_dcs()];
        dist[s.0] = 0.0;
        let mut heap = BinaryHeap::from([(Reverse(Ord64(0.0)), s)]);
        while let Some((Reverse(Ord64(d)), v)) = heap.pop() {
            if d > dist[v.0] {
                continue;
            }
            intra_max = intra_max.max(d);
            for &a in net.out_arcs(v) {
                let arc = net.arc(a);
                if net.is_sink(arc.to) || net.dc(arc.to).layer != layer {
                    continue;
                }
                let nd = d + net.link(arc.link).latency;
                if nd < dist[arc.to.0] {
                    dist[arc.to.0] = nd;
                    heap.push((Reverse(Ord64(nd)), arc.to));
                }
            }
        }
    }
    (intra_max, inter_min)
}

#[derive(PartialEq)]
struct Ord64(f64);

impl Eq for Ord64 {}

impl PartialOrd for Ord64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ord64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// The bound strict mode puts on every logical link: halfway between the
/// two thresholds, or the intra-layer one when there is a single layer.
pub fn strict_bound(net: &SubstrateNetwork) -> Result<f64> {
    let (intra, inter) = layer_thresholds(net);
    if inter.is_infinite() {
        return Ok(intra);
    }
    if intra >= inter {
        return Err(Error::Harness(format!(
            "strict latency is undefined here: paths inside a layer reach {intra} while a link between layers has latency {inter}"
        )));
    }
    Ok((intra + inter) / 2.0)
}

/// Returns `apps` with latency bounds set for `mode`.
pub fn make_latency_mode(apps: &[Application], mode: LatencyMode, net: &SubstrateNetwork) -> Result<Vec<Application>> {
    let strict = match mode {
        LatencyMode::Relaxed => None,
        _ => Some(strict_bound(net)?),
    };
    Ok(apps
        .iter()
        .enumerate()
        .map(|(i, app)| {
            let bound = match (mode, strict) {
                (LatencyMode::Strict, Some(b)) => b,
                (LatencyMode::Mixed, Some(b)) if i == 0 => b,
                _ => f64::INFINITY,
            };
            let mut app = app.clone();
            for e in app.link_ids().collect::<Vec<_>>() {
                app.set_latency_bound(e, bound);
            }
            app
        })
        .collect())
}
