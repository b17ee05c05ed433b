use std::fmt;

use serde::{Deserialize, Serialize};

use super::topology::{EdgeId, LinkId, NodeId, Topology};

/// A walk through the topology.
///
/// Ordering is lexicographic on the node sequence first, then on edge ids,
/// which only matters for parallel links.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path {
    nodes: Vec<NodeId>,
    edges: Vec<EdgeId>,
}

impl Path {
    /// Builds a path from a contiguous edge sequence.
    ///
    /// Panics if the sequence is empty or not contiguous; use
    /// [`Path::try_from_edges`] for untrusted input.
    pub fn from_edges(topo: &Topology, edges: Vec<EdgeId>) -> Path {
        Self::try_from_edges(topo, edges).expect("non-contiguous or empty path")
    }

    pub fn try_from_edges(topo: &Topology, edges: Vec<EdgeId>) -> Option<Path> {
        let first = edges.first()?;
        let mut nodes = Vec::with_capacity(edges.len() + 1);
        nodes.push(topo.edge(*first).src);
        for e in &edges {
            let edge = topo.edge(*e);
            if edge.src != *nodes.last().unwrap() {
                return None;
            }
            nodes.push(edge.dst);
        }
        Some(Path { nodes, edges })
    }

    /// Builds a path without checking contiguity. Used by validation tests
    /// and by parsers that report their own errors.
    pub fn from_raw(nodes: Vec<NodeId>, edges: Vec<EdgeId>) -> Path {
        Path { nodes, edges }
    }

    /// Follows a node sequence, picking the lowest-id enabled edge per hop.
    pub fn from_nodes(topo: &Topology, nodes: &[NodeId]) -> Option<Path> {
        let edges = nodes
            .windows(2)
            .map(|w| topo.edge_between(w[0], w[1]))
            .collect::<Option<Vec<_>>>()?;
        Self::try_from_edges(topo, edges)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn links(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.edges.iter().map(|e| e.link())
    }

    pub fn src(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn dst(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }

    pub fn hops(&self) -> usize {
        self.edges.len()
    }

    pub fn latency(&self, topo: &Topology) -> f64 {
        self.edges.iter().map(|e| topo.edge(*e).latency_weight).sum()
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = self.nodes.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    pub fn is_contiguous(&self, topo: &Topology) -> bool {
        !self.edges.is_empty()
            && self.nodes.len() == self.edges.len() + 1
            && self.edges.iter().enumerate().all(|(i, e)| {
                let edge = topo.edge(*e);
                edge.src == self.nodes[i] && edge.dst == self.nodes[i + 1]
            })
    }

    pub fn uses_link(&self, link: LinkId) -> bool {
        self.edges.iter().any(|e| e.link() == link)
    }

    pub fn display<'a>(&'a self, topo: &'a Topology) -> PathDisplay<'a> {
        PathDisplay { path: self, topo }
    }
}

pub struct PathDisplay<'a> {
    path: &'a Path,
    topo: &'a Topology,
}

impl fmt::Display for PathDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.path.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str(">")?;
            }
            f.write_str(self.topo.node_name(*n))?;
        }
        Ok(())
    }
}

/// An undirected walk over links, used for switch-level routes before host
/// stubs are attached. May be empty (a node to itself).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Walk {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
}

impl Walk {
    pub fn trivial(node: NodeId) -> Walk {
        Walk { nodes: vec![node], edges: Vec::new() }
    }

    pub fn start(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn end(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }

    /// The same walk traversed backwards.
    pub fn reversed(&self) -> Walk {
        Walk {
            nodes: self.nodes.iter().rev().copied().collect(),
            edges: self.edges.iter().rev().map(|e| e.reverse()).collect(),
        }
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn extend(&mut self, other: &Walk) {
        debug_assert_eq!(self.end(), other.start());
        self.nodes.extend_from_slice(&other.nodes[1..]);
        self.edges.extend_from_slice(&other.edges);
    }

    /// Removes cycles: whenever a node repeats, everything between its first
    /// and last occurrence is dropped.
    pub fn shortcut(&self) -> Walk {
        let mut nodes: Vec<NodeId> = vec![self.nodes[0]];
        let mut edges: Vec<EdgeId> = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            let next = self.nodes[i + 1];
            if let Some(pos) = nodes.iter().position(|n| *n == next) {
                nodes.truncate(pos + 1);
                edges.truncate(pos);
            } else {
                nodes.push(next);
                edges.push(*e);
            }
        }
        Walk { nodes, edges }
    }

    pub fn length(&self, lengths: impl Fn(EdgeId) -> f64) -> f64 {
        self.edges.iter().map(|e| lengths(*e)).sum()
    }

    /// Attaches host stubs to a switch-level walk. The walk must run from
    /// `src`'s switch to `dst`'s switch.
    pub fn between_hosts(&self, topo: &Topology, src: NodeId, dst: NodeId) -> Path {
        let (up, _) = topo.host_stubs(src);
        let (_, down) = topo.host_stubs(dst);
        let mut edges = Vec::with_capacity(self.edges.len() + 2);
        edges.push(up);
        edges.extend_from_slice(&self.edges);
        edges.push(down);
        Path::from_edges(topo, edges)
    }
}
