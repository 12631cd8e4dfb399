//! JSON documents for topologies, applications and users.

use serde::{Deserialize, Serialize};

use super::application::{AppId, Application, EdgeSpec, FnId, LogicalLinkId};
use super::demand::{DemandSet, User};
use super::network::{Dc, DcId, Layer, Link, SubstrateNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DcDoc {
    pub id: String,
    /// `null` means unbounded.
    pub capacity: Option<f64>,
    pub cost: f64,
    #[serde(default = "edge_layer")]
    pub layer: Layer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo: Option<[f64; 2]>,
}

fn edge_layer() -> Layer {
    Layer::Edge
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkDoc {
    pub endpoints: [String; 2],
    pub capacity: Option<f64>,
    pub cost: f64,
    pub latency: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    /// `null` or missing means unconstrained.
    #[serde(default)]
    pub latency_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XiNodeDoc {
    pub function: String,
    pub dc: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XiLinkDoc {
    pub from: String,
    pub to: String,
    pub link: [String; 2],
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppDoc {
    pub id: String,
    pub functions: Vec<String>,
    pub edges: Vec<EdgeDoc>,
    #[serde(default = "one")]
    pub xi_node_default: f64,
    #[serde(default = "one")]
    pub xi_link_default: f64,
    #[serde(default)]
    pub xi_node: Vec<XiNodeDoc>,
    #[serde(default)]
    pub xi_link: Vec<XiLinkDoc>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TopologyDoc {
    pub dcs: Vec<DcDoc>,
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub applications: Vec<AppDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserDoc {
    pub id: u64,
    pub app: String,
    pub dc: String,
    pub demand: f64,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn bound(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::INFINITY)
}

fn unbound(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Parses and validates the `dcs`/`links` part of a topology document.
pub fn load_network(text: &str) -> Result<SubstrateNetwork> {
    network_from_doc(&parse::<TopologyDoc>(text)?)
}

pub fn network_from_doc(doc: &TopologyDoc) -> Result<SubstrateNetwork> {
    let dcs = doc
        .dcs
        .iter()
        .map(|d| Dc {
            name: d.id.clone(),
            capacity: bound(d.capacity),
            cost: d.cost,
            layer: d.layer,
            geo: d.geo.map(|[x, y]| (x, y)),
        })
        .collect::<Vec<_>>();
    let find = |name: &str| {
        dcs.iter()
            .position(|d| d.name == name)
            .map(DcId)
            .ok_or_else(|| Error::InvalidNetwork(format!("link references unknown DC `{name}`")))
    };
    let mut links = Vec::with_capacity(doc.links.len());
    for l in &doc.links {
        links.push(Link {
            a: find(&l.endpoints[0])?,
            b: find(&l.endpoints[1])?,
            capacity: bound(l.capacity),
            cost: l.cost,
            latency: l.latency,
        });
    }
    SubstrateNetwork::new(dcs, links)
}

/// Parses the `applications` part of a topology document against `net`.
pub fn load_applications(text: &str, net: &SubstrateNetwork) -> Result<Vec<Application>> {
    let doc: TopologyDoc = parse(text)?;
    doc.applications.iter().map(|a| application_from_doc(a, net)).collect()
}

pub fn application_from_doc(doc: &AppDoc, net: &SubstrateNetwork) -> Result<Application> {
    let bad = |reason: String| Error::InvalidApplication { app: doc.id.clone(), reason };
    let names: Vec<&str> = doc.functions.iter().map(String::as_str).collect();
    let edges: Vec<EdgeSpec> = doc
        .edges
        .iter()
        .map(|e| EdgeSpec { from: e.from.clone(), to: e.to.clone(), latency_bound: bound(e.latency_bound) })
        .collect();
    let mut app = Application::new(&doc.id, &names, &edges, doc.xi_node_default, doc.xi_link_default)?;
    let fn_id = |name: &str| {
        app.functions()
            .iter()
            .position(|f| f.name == name)
            .map(FnId)
            .ok_or_else(|| bad(format!("unknown function `{name}`")))
    };
    let dc_id = |name: &str| net.dc_by_name(name).ok_or_else(|| bad(format!("unknown DC `{name}`")));
    let mut node_entries = Vec::new();
    for x in &doc.xi_node {
        node_entries.push((fn_id(&x.function)?, dc_id(&x.dc)?, x.value));
    }
    let mut link_entries = Vec::new();
    for x in &doc.xi_link {
        let (from, to) = (fn_id(&x.from)?, fn_id(&x.to)?);
        let e = app
            .link_ids()
            .find(|&e| app.link(e).from == from && app.link(e).to == to)
            .ok_or_else(|| bad(format!("no logical link {} -> {}", x.from, x.to)))?;
        let l = net
            .link_between(dc_id(&x.link[0])?, dc_id(&x.link[1])?)
            .ok_or_else(|| bad(format!("no substrate link {}-{}", x.link[0], x.link[1])))?;
        link_entries.push((e, l, x.value));
    }
    for (f, d, v) in node_entries {
        app.set_xi_node(f, d, v)?;
    }
    for (e, l, v) in link_entries {
        app.set_xi_link(e, l, v)?;
    }
    Ok(app)
}

/// Parses an explicit `{"users": [...]}` document.
pub fn load_users(text: &str, net: &SubstrateNetwork, apps: &[Application]) -> Result<DemandSet> {
    #[derive(Deserialize)]
    struct Doc {
        users: Vec<UserDoc>,
    }
    let doc: Doc = parse(text)?;
    users_from_docs(&doc.users, net, apps)
}

pub fn users_from_docs(docs: &[UserDoc], net: &SubstrateNetwork, apps: &[Application]) -> Result<DemandSet> {
    let mut users = Vec::with_capacity(docs.len());
    for u in docs {
        let app = apps
            .iter()
            .position(|a| a.name == u.app)
            .ok_or_else(|| Error::InvalidDemand(format!("user {} references unknown app `{}`", u.id, u.app)))?;
        let dc = net
            .dc_by_name(&u.dc)
            .ok_or_else(|| Error::InvalidDemand(format!("user {} references unknown DC `{}`", u.id, u.dc)))?;
        users.push(User { id: u.id, app: AppId(app), dc, demand: u.demand });
    }
    DemandSet::new(users, net, apps)
}

pub fn users_to_docs(users: &[User], net: &SubstrateNetwork, apps: &[Application]) -> Vec<UserDoc> {
    users
        .iter()
        .map(|u| UserDoc { id: u.id, app: apps[u.app.0].name.clone(), dc: net.dc(u.dc).name.clone(), demand: u.demand })
        .collect()
}

/// Serializes a network (sink excluded) and its applications.
pub fn topology_to_doc(net: &SubstrateNetwork, apps: &[Application]) -> TopologyDoc {
    let dcs = net
        .real_dcs()
        .map(|d| {
            let dc = net.dc(d);
            DcDoc {
                id: dc.name.clone(),
                capacity: unbound(dc.capacity),
                cost: dc.cost,
                layer: dc.layer,
                geo: dc.geo.map(|(x, y)| [x, y]),
            }
        })
        .collect();
    let links = net
        .links()
        .iter()
        .enumerate()
        .filter(|(k, _)| !net.is_sink_link(super::network::LinkId(*k)))
        .map(|(_, l)| LinkDoc {
            endpoints: [net.dc(l.a).name.clone(), net.dc(l.b).name.clone()],
            capacity: unbound(l.capacity),
            cost: l.cost,
            latency: l.latency,
        })
        .collect();
    let applications = apps.iter().map(|a| application_to_doc(a, net)).collect();
    TopologyDoc { dcs, links, applications }
}

pub fn application_to_doc(app: &Application, net: &SubstrateNetwork) -> AppDoc {
    let fname = |f: FnId| app.function(f).name.clone();
    let edges = app
        .link_ids()
        .filter(|&e| !app.is_terminator_link(e))
        .map(|e| {
            let l = app.link(e);
            EdgeDoc { from: fname(l.from), to: fname(l.to), latency_bound: unbound(l.latency_bound) }
        })
        .collect();
    let xi_node = app
        .xi_node_overrides()
        .iter()
        .filter(|((_, d), _)| !net.is_sink(*d))
        .map(|(&(f, d), &value)| XiNodeDoc { function: fname(f), dc: net.dc(d).name.clone(), value })
        .collect();
    let xi_link = app
        .xi_link_overrides()
        .iter()
        .map(|(&(e, l), &value)| {
            let link = app.link(LogicalLinkId(e.0));
            let sub = net.link(l);
            XiLinkDoc {
                from: fname(link.from),
                to: fname(link.to),
                link: [net.dc(sub.a).name.clone(), net.dc(sub.b).name.clone()],
                value,
            }
        })
        .collect();
    AppDoc {
        id: app.name.clone(),
        functions: app.vnfs().map(fname).collect(),
        edges,
        xi_node_default: app.xi_node_default,
        xi_link_default: app.xi_link_default,
        xi_node,
        xi_link,
    }
}

/// Writes a deployment as two CSV files: `path` with one (user, function,
/// dc) row per placed function, and `path` with extension `paths.csv` with
/// one (user, logical_link, hop_index, arc) row per hop. Rejected users get
/// a single placement row with function `*` and dc `rejected`.
pub fn write_deployment_csv(
    path: &std::path::Path,
    net: &SubstrateNetwork,
    apps: &[Application],
    users: &[User],
    dep: &super::Deployment,
) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    let mut place = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut hops = csv::Writer::from_path(path.with_extension("paths.csv")).map_err(csv_err)?;
    place.write_record(["user", "function", "dc"]).map_err(csv_err)?;
    hops.write_record(["user", "logical_link", "hop_index", "arc"]).map_err(csv_err)?;
    for (u, emb) in users.iter().zip(&dep.embeddings) {
        let id = u.id.to_string();
        let Some(emb) = emb else {
            place.write_record([id.as_str(), "*", "rejected"]).map_err(csv_err)?;
            continue;
        };
        let app = &apps[u.app.0];
        for (f, func) in app.functions().iter().enumerate() {
            place.write_record([id.as_str(), &func.name, &net.dc(emb.placement[f]).name]).map_err(csv_err)?;
        }
        for e in app.link_ids() {
            let link = app.link(e);
            let name = format!("{}->{}", app.function(link.from).name, app.function(link.to).name);
            for (h, &a) in emb.path(e).iter().enumerate() {
                let arc = net.arc(a);
                let arc = format!("{}->{}", net.dc(arc.from).name, net.dc(arc.to).name);
                hops.write_record([id.as_str(), &name, &h.to_string(), &arc]).map_err(csv_err)?;
            }
        }
    }
    place.flush()?;
    hops.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "dcs": [
            {"id": "a", "capacity": 10, "cost": 2, "layer": "edge", "geo": [0, 0]},
            {"id": "b", "capacity": null, "cost": 1, "layer": "core"}
        ],
        "links": [{"endpoints": ["a", "b"], "capacity": 5, "cost": 1, "latency": 3}],
        "applications": [{
            "id": "app0",
            "functions": ["fw", "nat"],
            "edges": [
                {"from": "U", "to": "fw", "latency_bound": 10},
                {"from": "fw", "to": "nat"}
            ],
            "xi_node": [{"function": "nat", "dc": "b", "value": 2}],
            "xi_link": [{"from": "fw", "to": "nat", "link": ["b", "a"], "value": 0.5}]
        }]
    }"#;

    #[test]
    fn minimal_document() {
        let net = load_network(DOC).unwrap();
        assert_eq!((net.num_dcs(), net.num_links()), (2, 1));
        assert_eq!(net.dc(DcId(1)).capacity, f64::INFINITY);
        let apps = load_applications(DOC, &net).unwrap();
        assert_eq!(apps[0].num_links(), 3);
        assert_eq!(apps[0].xi_node(FnId(2), DcId(1)), 2.0);
        assert_eq!(apps[0].link(LogicalLinkId(1)).latency_bound, f64::INFINITY);
    }

    #[test]
    fn round_trip() {
        let net = load_network(DOC).unwrap();
        let apps = load_applications(DOC, &net).unwrap();
        let text = serde_json::to_string(&topology_to_doc(&net, &apps)).unwrap();
        let net2 = load_network(&text).unwrap();
        let apps2 = load_applications(&text, &net2).unwrap();
        assert_eq!(net2.dcs(), net.dcs());
        assert_eq!(apps2[0].xi_link_overrides(), apps[0].xi_link_overrides());
    }

    #[test]
    fn dangling_link() {
        let doc = r#"{"dcs":[{"id":"a","capacity":1,"cost":1}],
            "links":[{"endpoints":["a","zz"],"capacity":1,"cost":1,"latency":1}]}"#;
        let err = load_network(doc).unwrap_err().to_string();
        assert!(err.contains("zz"), "{err}");
    }

    #[test]
    fn users_document() {
        let net = load_network(DOC).unwrap();
        let apps = load_applications(DOC, &net).unwrap();
        let users = load_users(r#"{"users":[{"id":7,"app":"app0","dc":"a","demand":1.5}]}"#, &net, &apps).unwrap();
        assert_eq!(users.total_demand(), 1.5);
        assert!(load_users(r#"{"users":[{"id":7,"app":"app0","dc":"a","demand":0}]}"#, &net, &apps).is_err());
    }
}
