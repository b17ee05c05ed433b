//! Capacitated network topology.
//!
//! Links are undirected in the input and expanded to a pair of directed edges
//! of equal capacity. Node identifiers are assigned in lexicographic name
//! order, so comparing `NodeId` sequences is the same as comparing node-name
//! sequences.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::TopologyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The undirected link this edge belongs to.
    pub fn link(self) -> LinkId {
        LinkId(self.0 / 2)
    }

    /// The opposite direction of the same link.
    pub fn reverse(self) -> EdgeId {
        EdgeId(self.0 ^ 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Directed edges `(a -> b, b -> a)` making up this link.
    pub fn edges(self) -> (EdgeId, EdgeId) {
        (EdgeId(self.0 * 2), EdgeId(self.0 * 2 + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Host,
    Switch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    /// bits/s
    pub capacity: f64,
    pub latency_weight: f64,
}

/// An immutable network topology.
///
/// A topology may carry a set of disabled links (see [`Topology::with_failed`]);
/// disabled links keep their identifiers but are skipped by every graph
/// traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    name: String,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out: Vec<Vec<EdgeId>>,
    disabled: BTreeSet<LinkId>,
    hosts: Vec<NodeId>,
    switches: Vec<NodeId>,
    host_switch: BTreeMap<NodeId, NodeId>,
    host_edges: BTreeMap<NodeId, (EdgeId, EdgeId)>,
}

/// Accumulates nodes and links before validation.
#[derive(Debug, Clone, Default)]
pub struct TopologyBuilder {
    name: String,
    nodes: Vec<Node>,
    links: Vec<(String, String, f64, f64)>,
}

impl TopologyBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    pub fn node(mut self, name: impl Into<String>, kind: NodeKind) -> Self {
        self.add_node(name, kind);
        self
    }

    pub fn switch(self, name: impl Into<String>) -> Self {
        self.node(name, NodeKind::Switch)
    }

    pub fn host(self, name: impl Into<String>) -> Self {
        self.node(name, NodeKind::Host)
    }

    pub fn link(mut self, a: impl Into<String>, b: impl Into<String>, capacity: f64, weight: f64) -> Self {
        self.add_link(a, b, capacity, weight);
        self
    }

    pub fn add_node(&mut self, name: impl Into<String>, kind: NodeKind) {
        self.nodes.push(Node { name: name.into(), kind });
    }

    pub fn add_link(&mut self, a: impl Into<String>, b: impl Into<String>, capacity: f64, weight: f64) {
        self.links.push((a.into(), b.into(), capacity, weight));
    }

    /// Attaches one host `h<switch>` (with the given stub capacity) to every
    /// switch that does not yet have a host.
    pub fn hosts_on_every_switch(mut self, stub_capacity: f64) -> Self {
        let with_host: BTreeSet<String> = self
            .links
            .iter()
            .flat_map(|(a, b, _, _)| {
                let ka = self.kind_of(a);
                let kb = self.kind_of(b);
                match (ka, kb) {
                    (Some(NodeKind::Host), _) => Some(b.clone()),
                    (_, Some(NodeKind::Host)) => Some(a.clone()),
                    _ => None,
                }
            })
            .collect();
        let switches: Vec<String> = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Switch && !with_host.contains(&n.name))
            .map(|n| n.name.clone())
            .collect();
        for s in switches {
            let h = format!("h-{s}");
            self.add_node(h.clone(), NodeKind::Host);
            self.add_link(h, s, stub_capacity, 0.0);
        }
        self
    }

    fn kind_of(&self, name: &str) -> Option<NodeKind> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.kind)
    }

    pub fn build(self) -> Result<Topology, TopologyError> {
        let mut names: Vec<&Node> = self.nodes.iter().collect();
        names.sort_by(|a, b| a.name.cmp(&b.name));
        for pair in names.windows(2) {
            if pair[0].name == pair[1].name {
                return Err(TopologyError::DuplicateNode(pair[0].name.clone()));
            }
        }
        let nodes: Vec<Node> = names.into_iter().cloned().collect();
        let index: BTreeMap<&str, NodeId> =
            nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), NodeId(i as u32))).collect();

        let mut edges = Vec::with_capacity(self.links.len() * 2);
        for (a, b, cap, weight) in &self.links {
            let src = *index.get(a.as_str()).ok_or_else(|| TopologyError::UnknownNode(a.clone()))?;
            let dst = *index.get(b.as_str()).ok_or_else(|| TopologyError::UnknownNode(b.clone()))?;
            if src == dst {
                return Err(TopologyError::SelfLoop(a.clone()));
            }
            if !(cap.is_finite() && *cap > 0.0) {
                return Err(TopologyError::NonPositiveCapacity { a: a.clone(), b: b.clone(), capacity: *cap });
            }
            if !(weight.is_finite() && *weight >= 0.0) {
                return Err(TopologyError::NegativeWeight { a: a.clone(), b: b.clone(), weight: *weight });
            }
            edges.push(Edge { src, dst, capacity: *cap, latency_weight: *weight });
            edges.push(Edge { src: dst, dst: src, capacity: *cap, latency_weight: *weight });
        }
        let topo = Topology::assemble(self.name, nodes, edges, BTreeSet::new())?;
        if !topo.is_connected() {
            return Err(TopologyError::Disconnected);
        }
        Ok(topo)
    }
}

impl Topology {
    fn assemble(
        name: String,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        disabled: BTreeSet<LinkId>,
    ) -> Result<Self, TopologyError> {
        let mut out = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            out[e.src.index()].push(EdgeId(i as u32));
        }
        let mut hosts = Vec::new();
        let mut switches = Vec::new();
        let mut host_switch = BTreeMap::new();
        let mut host_edges = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            let id = NodeId(i as u32);
            match n.kind {
                NodeKind::Switch => switches.push(id),
                NodeKind::Host => {
                    let stubs = &out[i];
                    if stubs.len() != 1 {
                        return Err(TopologyError::HostDegree { host: n.name.clone(), degree: stubs.len() });
                    }
                    let up = stubs[0];
                    let sw = edges[up.index()].dst;
                    if nodes[sw.index()].kind != NodeKind::Switch {
                        return Err(TopologyError::HostDegree { host: n.name.clone(), degree: stubs.len() });
                    }
                    hosts.push(id);
                    host_switch.insert(id, sw);
                    host_edges.insert(id, (up, up.reverse()));
                }
            }
        }
        Ok(Self { name, nodes, edges, out, disabled, hosts, switches, host_switch, host_edges })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .binary_search_by(|n| n.name.as_str().cmp(name))
            .ok()
            .map(|i| NodeId(i as u32))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.index()]
    }

    pub fn link_count(&self) -> usize {
        self.edges.len() / 2
    }

    pub fn links(&self) -> impl Iterator<Item = LinkId> + '_ {
        (0..self.link_count() as u32).map(LinkId)
    }

    /// Link endpoints in the orientation they were declared.
    pub fn link_endpoints(&self, link: LinkId) -> (NodeId, NodeId) {
        let e = self.edge(link.edges().0);
        (e.src, e.dst)
    }

    pub fn link_capacity(&self, link: LinkId) -> f64 {
        self.edge(link.edges().0).capacity
    }

    /// Switch-to-switch links, enabled or not.
    pub fn core_links(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.links().filter(move |&l| {
            let (a, b) = self.link_endpoints(l);
            self.is_switch(a) && self.is_switch(b)
        })
    }

    pub fn link_label(&self, link: LinkId) -> String {
        let (a, b) = self.link_endpoints(link);
        format!("{}-{}", self.node_name(a), self.node_name(b))
    }

    pub fn is_enabled(&self, link: LinkId) -> bool {
        !self.disabled.contains(&link)
    }

    pub fn edge_enabled(&self, edge: EdgeId) -> bool {
        self.is_enabled(edge.link())
    }

    pub fn disabled_links(&self) -> &BTreeSet<LinkId> {
        &self.disabled
    }

    /// Enabled outgoing edges of `node`.
    pub fn out_edges(&self, node: NodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.out[node.index()].iter().copied().filter(move |e| self.edge_enabled(*e))
    }

    /// Enabled outgoing edges whose head is a switch.
    pub fn switch_out_edges(&self, node: NodeId) -> impl Iterator<Item = EdgeId> + '_ {
        self.out_edges(node).filter(move |e| self.is_switch(self.edge(*e).dst))
    }

    pub fn is_switch(&self, id: NodeId) -> bool {
        self.nodes[id.index()].kind == NodeKind::Switch
    }

    pub fn is_host(&self, id: NodeId) -> bool {
        self.nodes[id.index()].kind == NodeKind::Host
    }

    /// Hosts in lexicographic name order.
    pub fn hosts(&self) -> &[NodeId] {
        &self.hosts
    }

    pub fn switches(&self) -> &[NodeId] {
        &self.switches
    }

    /// The switch a host hangs off.
    pub fn host_switch(&self, host: NodeId) -> NodeId {
        self.host_switch[&host]
    }

    /// `(host -> switch, switch -> host)` stub edges.
    pub fn host_stubs(&self, host: NodeId) -> (EdgeId, EdgeId) {
        self.host_edges[&host]
    }

    /// Ordered host pairs `(s, t)` with `s != t`.
    pub fn host_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.hosts
            .iter()
            .flat_map(move |&s| self.hosts.iter().filter(move |&&t| t != s).map(move |&t| (s, t)))
    }

    /// The first enabled edge from `a` to `b`, lowest id first.
    pub fn edge_between(&self, a: NodeId, b: NodeId) -> Option<EdgeId> {
        self.out_edges(a).find(|e| self.edge(*e).dst == b)
    }

    /// A copy of this topology with the given links additionally disabled.
    pub fn with_failed(&self, failed: &BTreeSet<LinkId>) -> Topology {
        let mut t = self.clone();
        t.disabled.extend(failed.iter().copied());
        t
    }

    /// A copy with every capacity multiplied by `factor`.
    pub fn scale_capacities(&self, factor: f64) -> Topology {
        let mut t = self.clone();
        for e in &mut t.edges {
            e.capacity *= factor;
        }
        t
    }

    /// Undirected connectivity over enabled links.
    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        self.component_of(NodeId(0)).len() == self.nodes.len()
    }

    /// Nodes reachable from `start` over enabled links.
    pub fn component_of(&self, start: NodeId) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(u) = queue.pop_front() {
            for e in self.out_edges(u) {
                let v = self.edge(e).dst;
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Whether the switch subgraph stays connected after removing `extra` links.
    pub fn connected_without(&self, extra: &BTreeSet<LinkId>) -> bool {
        self.with_failed(extra).is_connected()
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.nodes {
            let kind = match n.kind {
                NodeKind::Host => "host",
                NodeKind::Switch => "switch",
            };
            writeln!(f, "node {} {}", n.name, kind)?;
        }
        for l in self.links() {
            let (a, b) = self.link_endpoints(l);
            let e = self.edge(l.edges().0);
            writeln!(
                f,
                "link {} {} cap={}bps weight={}",
                self.node_name(a),
                self.node_name(b),
                e.capacity,
                e.latency_weight
            )?;
        }
        Ok(())
    }
}
