//! Shortest-path machinery over the switch subgraph.
//!
//! Ties between equal-cost routes are broken by hop count and then by the
//! lexicographic order of the node sequence, which (since node ids follow
//! name order) is the order of node-name sequences.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::model::{EdgeId, NodeId, Path, Topology, Walk};

/// Relative tolerance when deciding whether two path costs are equal.
pub const COST_TOLERANCE: f64 = 1e-9;

/// Scale-free, so lengths such as `1/capacity` behave like latencies.
pub fn costs_equal(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= COST_TOLERANCE * a.abs().max(b.abs())
}

/// Compares costs with tolerance, then hops, then node sequence, then edges.
pub fn cmp_routes(a_cost: f64, a: &Walk, b_cost: f64, b: &Walk) -> Ordering {
    if !costs_equal(a_cost, b_cost) {
        return a_cost.total_cmp(&b_cost);
    }
    a.edges
        .len()
        .cmp(&b.edges.len())
        .then_with(|| a.nodes.cmp(&b.nodes))
        .then_with(|| a.edges.cmp(&b.edges))
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, NodeId);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Restrictions applied on top of the topology's own disabled links.
#[derive(Debug, Clone, Default)]
pub struct Mask {
    pub edges: Vec<bool>,
    pub nodes: Vec<bool>,
}

impl Mask {
    pub fn new(topo: &Topology) -> Self {
        Mask { edges: vec![false; topo.edge_count()], nodes: vec![false; topo.node_count()] }
    }

    fn blocks(&self, topo: &Topology, e: EdgeId) -> bool {
        (!self.edges.is_empty() && self.edges[e.index()])
            || (!self.nodes.is_empty() && {
                let edge = topo.edge(e);
                self.nodes[edge.src.index()] || self.nodes[edge.dst.index()]
            })
    }
}

/// Shortest-path information towards one target switch.
#[derive(Debug, Clone)]
pub struct SpTree {
    pub target: NodeId,
    pub dist: Vec<f64>,
    pub hops: Vec<usize>,
}

fn usable<'a>(topo: &'a Topology, u: NodeId, mask: Option<&'a Mask>) -> impl Iterator<Item = EdgeId> + 'a {
    topo.switch_out_edges(u).filter(move |e| mask.is_none_or(|m| !m.blocks(topo, *e)))
}

/// Out edges of `v` whose reverse (an edge into `v`) the mask allows.
fn usable_in<'a>(topo: &'a Topology, v: NodeId, mask: Option<&'a Mask>) -> impl Iterator<Item = EdgeId> + 'a {
    topo.switch_out_edges(v).filter(move |e| mask.is_none_or(|m| !m.blocks(topo, e.reverse())))
}

/// Reverse Dijkstra from `target` over enabled switch links, with per-edge
/// `lengths` (indexed by edge id).
pub fn sp_tree(topo: &Topology, lengths: &[f64], target: NodeId, mask: Option<&Mask>) -> SpTree {
    let n = topo.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut hops = vec![usize::MAX; n];
    if mask.is_some_and(|m| !m.nodes.is_empty() && m.nodes[target.index()]) {
        return SpTree { target, dist, hops };
    }
    dist[target.index()] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, target)]);
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v.index()] {
            continue;
        }
        // edges into v are reverses of v's out edges
        for e in usable_in(topo, v, mask) {
            let u = topo.edge(e).dst;
            let nd = d + lengths[e.reverse().index()];
            if nd < dist[u.index()] {
                dist[u.index()] = nd;
                heap.push(Entry(nd, u));
            }
        }
    }
    // fewest hops among cost-tight routes
    hops[target.index()] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        for e in usable_in(topo, v, mask) {
            let u = topo.edge(e).dst;
            if hops[u.index()] == usize::MAX
                && dist[u.index()].is_finite()
                && costs_equal(lengths[e.reverse().index()] + dist[v.index()], dist[u.index()])
            {
                hops[u.index()] = hops[v.index()] + 1;
                queue.push_back(u);
            }
        }
    }
    SpTree { target, dist, hops }
}

impl SpTree {
    pub fn reachable(&self, from: NodeId) -> bool {
        self.dist[from.index()].is_finite()
    }

    fn tight(&self, topo: &Topology, lengths: &[f64], e: EdgeId) -> bool {
        let edge = topo.edge(e);
        let (u, v) = (edge.src.index(), edge.dst.index());
        self.dist[v].is_finite()
            && self.hops[v] != usize::MAX
            && costs_equal(lengths[e.index()] + self.dist[v], self.dist[u])
    }

    /// The minimum route from `from` under (cost, hops, node sequence).
    pub fn walk(&self, topo: &Topology, lengths: &[f64], from: NodeId, mask: Option<&Mask>) -> Option<Walk> {
        if !self.reachable(from) || self.hops[from.index()] == usize::MAX {
            return None;
        }
        let mut w = Walk::trivial(from);
        let mut u = from;
        while u != self.target {
            let next = usable(topo, u, mask)
                .filter(|e| self.tight(topo, lengths, *e))
                .filter(|e| self.hops[topo.edge(*e).dst.index()] + 1 == self.hops[u.index()])
                .min_by_key(|e| (topo.edge(*e).dst, *e))?;
            u = topo.edge(next).dst;
            w.nodes.push(u);
            w.edges.push(next);
        }
        Some(w)
    }

    /// Every simple route from `from` whose cost equals the minimum, in node
    /// sequence order.
    pub fn all_tight_walks(&self, topo: &Topology, lengths: &[f64], from: NodeId) -> Vec<Walk> {
        let mut out = Vec::new();
        if !self.reachable(from) {
            return out;
        }
        let mut on_path = vec![false; topo.node_count()];
        let mut stack = Walk::trivial(from);
        on_path[from.index()] = true;
        self.dfs(topo, lengths, &mut stack, &mut on_path, &mut out);
        out.sort();
        out
    }

    fn dfs(&self, topo: &Topology, lengths: &[f64], w: &mut Walk, on_path: &mut [bool], out: &mut Vec<Walk>) {
        let u = w.end();
        if u == self.target {
            out.push(w.clone());
            return;
        }
        for e in topo.switch_out_edges(u) {
            let v = topo.edge(e).dst;
            if on_path[v.index()] || !self.tight(topo, lengths, e) {
                continue;
            }
            on_path[v.index()] = true;
            w.nodes.push(v);
            w.edges.push(e);
            self.dfs(topo, lengths, w, on_path, out);
            w.nodes.pop();
            w.edges.pop();
            on_path[v.index()] = false;
        }
    }
}

/// Latency weights as a per-edge length vector.
pub fn latency_lengths(topo: &Topology) -> Vec<f64> {
    topo.edges().iter().map(|e| e.latency_weight).collect()
}

/// Shortest routes between all ordered switch pairs, one tree per target.
pub struct AllPairs {
    pub lengths: Vec<f64>,
    trees: Vec<Option<SpTree>>,
}

impl AllPairs {
    pub fn new(topo: &Topology, lengths: Vec<f64>) -> Self {
        let mut trees = vec![None; topo.node_count()];
        for &s in topo.switches() {
            trees[s.index()] = Some(sp_tree(topo, &lengths, s, None));
        }
        AllPairs { lengths, trees }
    }

    pub fn latency(topo: &Topology) -> Self {
        Self::new(topo, latency_lengths(topo))
    }

    pub fn tree(&self, target: NodeId) -> &SpTree {
        self.trees[target.index()].as_ref().expect("target is not a switch")
    }

    pub fn distance(&self, from: NodeId, to: NodeId) -> f64 {
        self.tree(to).dist[from.index()]
    }

    pub fn walk(&self, topo: &Topology, from: NodeId, to: NodeId) -> Option<Walk> {
        self.tree(to).walk(topo, &self.lengths, from, None)
    }
}

/// Host-to-host path following the given switch walk.
pub fn host_path(topo: &Topology, walk: &Walk, src: NodeId, dst: NodeId) -> Path {
    walk.between_hosts(topo, src, dst)
}
