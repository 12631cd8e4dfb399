use super::application::Application;
use super::network::{Dc, Layer, SubstrateNetwork};
use crate::error::{Error, Result};

pub const DEFAULT_PENALTY: f64 = 1e4;

/// Appends the rejection sink: an unbounded DC priced at `M` times the most
/// expensive real DC, reachable from every DC over free zero-latency links.
///
/// When every real cost (or every ξ) is zero the formula would make rejection
/// free, so a floor of 1 is used for the multiplied quantity.
pub fn add_rejection_sink(
    net: &SubstrateNetwork,
    apps: &[Application],
    penalty: f64,
) -> Result<(SubstrateNetwork, Vec<Application>)> {
    if net.sink().is_some() {
        return Err(Error::Sink("network already has a sink".into()));
    }
    if net.num_dcs() == 0 {
        return Err(Error::Sink("network is empty".into()));
    }
    if !(penalty > 1.0 && penalty.is_finite()) {
        return Err(Error::Sink(format!("penalty factor must be finite and > 1, got {penalty}")));
    }
    let max_cost = net.max_real_cost();
    let max_cost = if max_cost > 0.0 { max_cost } else { 1.0 };
    let mut xi = apps.iter().map(|a| a.max_xi_node(net.num_dcs())).fold(0.0, f64::max);
    if xi <= 0.0 {
        xi = 1.0;
    }

    let mut out = net.clone();
    let sink = out.push_sink(Dc {
        name: "sink".into(),
        capacity: f64::INFINITY,
        cost: penalty * max_cost,
        layer: Layer::Sink,
        geo: None,
    });
    let apps = apps
        .iter()
        .map(|a| {
            let mut a = a.clone();
            a.set_sink(sink, xi);
            a
        })
        .collect();
    Ok((out, apps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::network::{DcId, Link};

    fn dc(cost: f64) -> Dc {
        Dc { name: format!("d{cost}"), capacity: 1.0, cost, layer: Layer::Edge, geo: None }
    }

    #[test]
    fn cost_is_penalty_times_max() {
        let net = SubstrateNetwork::new(
            vec![dc(50.0), dc(10.0), dc(1.0)],
            vec![
                Link { a: DcId(0), b: DcId(1), capacity: 1.0, cost: 1.0, latency: 1.0 },
                Link { a: DcId(1), b: DcId(2), capacity: 1.0, cost: 1.0, latency: 1.0 },
            ],
        )
        .unwrap();
        let (aug, _) = add_rejection_sink(&net, &[], 1000.0).unwrap();
        let s = aug.sink().unwrap();
        assert_eq!(aug.dc(s).cost, 50_000.0);
        assert_eq!(aug.num_links(), 5);
        assert!(add_rejection_sink(&aug, &[], 1000.0).is_err());
    }

    #[test]
    fn single_dc_gets_one_sink_link() {
        let net = SubstrateNetwork::new(vec![dc(2.0)], vec![]).unwrap();
        let (aug, _) = add_rejection_sink(&net, &[], DEFAULT_PENALTY).unwrap();
        assert_eq!(aug.num_links(), 1);
        assert_eq!(aug.out_arcs(aug.sink().unwrap()).len(), 0);
        assert_eq!(aug.out_arcs(DcId(0)).len(), 1);
    }

    #[test]
    fn empty_network_is_refused() {
        let net = SubstrateNetwork::new(vec![], vec![]).unwrap();
        assert!(add_rejection_sink(&net, &[], DEFAULT_PENALTY).is_err());
        assert!(add_rejection_sink(&SubstrateNetwork::new(vec![dc(1.0)], vec![]).unwrap(), &[], 0.5).is_err());
    }
}
