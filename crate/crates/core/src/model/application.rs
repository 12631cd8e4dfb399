use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::network::{DcId, LinkId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AppId(pub usize);

/// Function index inside one application; index 0 is always the root `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FnId(pub usize);

/// Logical-link index inside one application, in BFS order from the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LogicalLinkId(pub usize);

pub const ROOT: FnId = FnId(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Root,
    Vnf,
    Terminator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub kind: FunctionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalLink {
    pub from: FnId,
    pub to: FnId,
    /// Time units; `f64::INFINITY` when unconstrained.
    pub latency_bound: f64,
    /// The logical link entering `from`, `None` for links leaving the root.
    pub parent: Option<LogicalLinkId>,
    pub children: Vec<LogicalLinkId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Chain,
    Tree,
}

/// Edge description used to build an [`Application`]: `(from, to, latency bound)`.
/// `"U"` names the root; `"T"` as a target names the leaf's terminator.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub latency_bound: f64,
}

impl EdgeSpec {
    pub fn new(from: &str, to: &str, latency_bound: f64) -> Self {
        EdgeSpec { from: from.into(), to: to.into(), latency_bound }
    }
}

/// A chain or tree of functions rooted at the user `U`, with one terminator
/// `T` hanging off every leaf.
#[derive(Debug, Clone)]
pub struct Application {
    pub name: String,
    functions: Vec<Function>,
    links: Vec<LogicalLink>,
    kind: TopologyKind,
    pub xi_node_default: f64,
    pub xi_link_default: f64,
    xi_node: BTreeMap<(FnId, DcId), f64>,
    xi_link: BTreeMap<(LogicalLinkId, LinkId), f64>,
    sink: Option<(DcId, f64)>,
}

impl Application {
    /// Builds an application from VNF names and edges. Terminators are added
    /// for every leaf that has no explicit `-> "T"` edge.
    pub fn new(
        name: &str,
        vnfs: &[&str],
        edges: &[EdgeSpec],
        xi_node_default: f64,
        xi_link_default: f64,
    ) -> Result<Self> {
        let bad = |reason: String| Error::InvalidApplication { app: name.to_string(), reason };
        if vnfs.is_empty() {
            return Err(bad("no functions".into()));
        }
        for v in [xi_node_default, xi_link_default] {
            if !v.is_finite() || v < 0.0 {
                return Err(bad("ξ defaults must be finite and non-negative".into()));
            }
        }
        let mut functions = vec![Function { name: "U".into(), kind: FunctionKind::Root }];
        for &v in vnfs {
            if v == "U" || v == "T" || v.starts_with("T:") {
                return Err(bad(format!("reserved function name `{v}`")));
            }
            if functions.iter().any(|f| f.name == v) {
                return Err(bad(format!("duplicate function `{v}`")));
            }
            functions.push(Function { name: v.into(), kind: FunctionKind::Vnf });
        }
        let find = |n: &str| functions.iter().position(|f| f.name == n).map(FnId);

        let mut children: Vec<Vec<(FnId, f64)>> = vec![Vec::new(); functions.len()];
        let mut has_parent = vec![false; functions.len()];
        let mut explicit_t = vec![false; functions.len()];
        for e in edges {
            if e.latency_bound.is_nan() || e.latency_bound < 0.0 {
                return Err(bad(format!("negative latency bound on {} -> {}", e.from, e.to)));
            }
            let from = find(&e.from).ok_or_else(|| bad(format!("unknown function `{}`", e.from)))?;
            if e.to == "T" {
                if from == ROOT {
                    return Err(bad("the root cannot feed a terminator directly".into()));
                }
                if explicit_t[from.0] {
                    return Err(bad(format!("duplicate terminator on `{}`", e.from)));
                }
                explicit_t[from.0] = true;
                continue;
            }
            let to = find(&e.to).ok_or_else(|| bad(format!("unknown function `{}`", e.to)))?;
            if to == ROOT {
                return Err(bad("edges may not enter the root".into()));
            }
            if has_parent[to.0] {
                return Err(bad(format!("function `{}` has two parents", e.to)));
            }
            has_parent[to.0] = true;
            children[from.0].push((to, e.latency_bound));
        }
        for (i, f) in functions.iter().enumerate().skip(1) {
            if !has_parent[i] {
                return Err(bad(format!("function `{}` is not reachable from U", f.name)));
            }
            if explicit_t[i] && !children[i].is_empty() {
                return Err(bad(format!("terminator on non-leaf `{}`", f.name)));
            }
        }
        if children[0].is_empty() {
            return Err(bad("U has no outgoing link".into()));
        }

        // BFS from the root; a parent-per-node graph reached entirely from U is a tree.
        let mut links: Vec<LogicalLink> = Vec::new();
        let mut entering: Vec<Option<LogicalLinkId>> = vec![None; functions.len()];
        let mut queue = VecDeque::from([ROOT]);
        let mut visited = 1;
        let mut leaves = Vec::new();
        while let Some(f) = queue.pop_front() {
            if f != ROOT && children[f.0].is_empty() {
                leaves.push(f);
            }
            for &(c, bound) in &children[f.0] {
                let id = LogicalLinkId(links.len());
                links.push(LogicalLink {
                    from: f,
                    to: c,
                    latency_bound: bound,
                    parent: entering[f.0],
                    children: Vec::new(),
                });
                if let Some(p) = entering[f.0] {
                    links[p.0].children.push(id);
                }
                entering[c.0] = Some(id);
                visited += 1;
                queue.push_back(c);
            }
        }
        if visited != functions.len() {
            return Err(bad("function graph contains a cycle".into()));
        }
        for leaf in leaves {
            let t = FnId(functions.len());
            functions.push(Function { name: format!("T:{}", functions[leaf.0].name), kind: FunctionKind::Terminator });
            let id = LogicalLinkId(links.len());
            let parent = entering[leaf.0];
            links.push(LogicalLink { from: leaf, to: t, latency_bound: 0.0, parent, children: vec![] });
            if let Some(p) = parent {
                links[p.0].children.push(id);
            }
        }
        let kind = if children.iter().all(|c| c.len() <= 1) { TopologyKind::Chain } else { TopologyKind::Tree };
        Ok(Application {
            name: name.to_string(),
            functions,
            links,
            kind,
            xi_node_default,
            xi_link_default,
            xi_node: BTreeMap::new(),
            xi_link: BTreeMap::new(),
            sink: None,
        })
    }

    /// Linear chain `U -> f1 -> ... -> fk -> T` with uniform bounds and unit ξ.
    pub fn chain(name: &str, vnfs: &[&str], latency_bound: f64) -> Result<Self> {
        let mut edges = vec![EdgeSpec::new("U", vnfs.first().copied().unwrap_or("?"), latency_bound)];
        for w in vnfs.windows(2) {
            edges.push(EdgeSpec::new(w[0], w[1], latency_bound));
        }
        Application::new(name, vnfs, &edges, 1.0, 1.0)
    }

    pub fn functions(&self) -> &[Function] {
        &self.functions
    }

    pub fn function(&self, f: FnId) -> &Function {
        &self.functions[f.0]
    }

    pub fn links(&self) -> &[LogicalLink] {
        &self.links
    }

    pub fn link(&self, e: LogicalLinkId) -> &LogicalLink {
        &self.links[e.0]
    }

    pub fn link_ids(&self) -> impl Iterator<Item = LogicalLinkId> {
        (0..self.links.len()).map(LogicalLinkId)
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    /// Real (non-fictitious) functions.
    pub fn vnfs(&self) -> impl Iterator<Item = FnId> + '_ {
        (0..self.functions.len()).map(FnId).filter(|&f| self.functions[f.0].kind == FunctionKind::Vnf)
    }

    pub fn num_vnfs(&self) -> usize {
        self.vnfs().count()
    }

    pub fn is_terminator_link(&self, e: LogicalLinkId) -> bool {
        self.functions[self.links[e.0].to.0].kind == FunctionKind::Terminator
    }

    pub fn is_root_link(&self, e: LogicalLinkId) -> bool {
        self.links[e.0].from == ROOT
    }

    /// The logical links leaving function `f`.
    pub fn out_links(&self, f: FnId) -> impl Iterator<Item = LogicalLinkId> + '_ {
        self.link_ids().filter(move |&e| self.links[e.0].from == f)
    }

    /// ECU per ADU for function `f` hosted on `d`.
    pub fn xi_node(&self, f: FnId, d: DcId) -> f64 {
        if self.functions[f.0].kind != FunctionKind::Vnf {
            return 0.0;
        }
        if let Some((s, xi)) = self.sink {
            if s == d {
                return xi;
            }
        }
        self.xi_node.get(&(f, d)).copied().unwrap_or(self.xi_node_default)
    }

    /// BWU per ADU for logical link `e` routed over substrate link `l`.
    pub fn xi_link(&self, e: LogicalLinkId, l: LinkId) -> f64 {
        let link = &self.links[e.0];
        if link.from == ROOT || self.functions[link.to.0].kind == FunctionKind::Terminator {
            return 0.0;
        }
        self.xi_link.get(&(e, l)).copied().unwrap_or(self.xi_link_default)
    }

    pub fn set_xi_node(&mut self, f: FnId, d: DcId, value: f64) -> Result<()> {
        self.check_xi(value)?;
        self.xi_node.insert((f, d), value);
        Ok(())
    }

    pub fn set_xi_link(&mut self, e: LogicalLinkId, l: LinkId, value: f64) -> Result<()> {
        self.check_xi(value)?;
        self.xi_link.insert((e, l), value);
        Ok(())
    }

    fn check_xi(&self, value: f64) -> Result<()> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidApplication {
                app: self.name.clone(),
                reason: format!("ξ value {value} must be finite and non-negative"),
            });
        }
        Ok(())
    }

    pub fn xi_node_overrides(&self) -> &BTreeMap<(FnId, DcId), f64> {
        &self.xi_node
    }

    pub fn xi_link_overrides(&self) -> &BTreeMap<(LogicalLinkId, LinkId), f64> {
        &self.xi_link
    }

    /// Largest node ξ this application can use on the given DCs.
    pub(crate) fn max_xi_node(&self, num_dcs: usize) -> f64 {
        let mut best: f64 = 0.0;
        for f in self.vnfs() {
            for d in (0..num_dcs).map(DcId) {
                best = best.max(self.xi_node(f, d));
            }
        }
        best
    }

    pub(crate) fn set_sink(&mut self, d: DcId, xi: f64) {
        self.sink = Some((d, xi));
    }

    /// Sink DC and the uniform ξ used there, if the sink was added.
    pub fn sink(&self) -> Option<(DcId, f64)> {
        self.sink
    }

    /// ECU per ADU one fully rejected user consumes on the sink.
    pub fn sink_ecu_per_adu(&self) -> f64 {
        self.sink.map_or(0.0, |(_, xi)| xi * self.num_vnfs() as f64)
    }

    pub fn set_latency_bound(&mut self, e: LogicalLinkId, bound: f64) {
        if !self.is_terminator_link(e) {
            self.links[e.0].latency_bound = bound;
        }
    }
}
