use crate::latency::LatencyTables;
use crate::model::{ArcId, DcId, SubstrateNetwork};

/// Latency-admissible paths from `s` to `t` for a logical link with bound
/// `bound`: the empty path when `s == t`, otherwise every simple path over
/// arcs allowed for `s` that avoids the sink and never re-enters `s`.
/// Empty when `t` is out of reach of the bound.
pub fn candidate_paths(
    net: &SubstrateNetwork,
    tables: &LatencyTables,
    s: DcId,
    t: DcId,
    bound: f64,
) -> Vec<Vec<ArcId>> {
    if s == t {
        return vec![Vec::new()];
    }
    if net.is_sink(s) || net.is_sink(t) {
        return Vec::new();
    }
    match tables.path_bound(s, t) {
        Some(b) if bound.is_infinite() || b <= bound + 1e-9 * bound.abs().max(1.0) => {}
        _ => return Vec::new(),
    }
    let mut out = Vec::new();
    let mut on = vec![false; net.num_dcs()];
    on[s.0] = true;
    let mut path = Vec::new();
    walk(net, tables, s, s, t, &mut on, &mut path, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    net: &SubstrateNetwork,
    tables: &LatencyTables,
    s: DcId,
    at: DcId,
    t: DcId,
    on: &mut [bool],
    path: &mut Vec<ArcId>,
    out: &mut Vec<Vec<ArcId>>,
) {
    for &a in net.out_arcs(at) {
        let to = net.arc(a).to;
        if on[to.0] || net.is_sink(to) || !tables.allowed(s, a) {
            continue;
        }
        path.push(a);
        if to == t {
            out.push(path.clone());
        } else {
            on[to.0] = true;
            walk(net, tables, s, to, t, on, path, out);
            on[to.0] = false;
        }
        path.pop();
    }
}
