//! Räcke's oblivious routing over FRT decomposition trees.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::RaeckeError;
use crate::graph::{sp_tree, SpTree};
use crate::model::{LinkId, NodeId, PathDistribution, RoutingScheme, Topology, Walk};

/// One cluster of the laminar decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Member switches, sorted.
    pub members: Vec<NodeId>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub representative: NodeId,
    /// Physical route from this cluster's representative to its parent's.
    /// `None` for the root and for clusters hanging off a virtual root that
    /// joins disconnected components.
    pub edge_path: Option<Walk>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTree {
    /// Cluster 0 is the root.
    pub clusters: Vec<Cluster>,
    leaf_of: BTreeMap<NodeId, usize>,
}

impl RoutingTree {
    /// Builds a tree from explicit clusters. Children lists are derived from
    /// the parent links; every switch must be exactly one leaf.
    pub fn from_clusters(mut clusters: Vec<Cluster>) -> RoutingTree {
        for c in clusters.iter_mut() {
            c.children.clear();
        }
        for i in 0..clusters.len() {
            if let Some(p) = clusters[i].parent {
                clusters[p].children.push(i);
            }
        }
        let leaf_of = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.children.is_empty())
            .map(|(i, c)| {
                assert_eq!(c.members.len(), 1, "leaf clusters hold a single switch");
                (c.members[0], i)
            })
            .collect();
        RoutingTree { clusters, leaf_of }
    }

    pub fn leaf(&self, switch: NodeId) -> usize {
        self.leaf_of[&switch]
    }

    pub fn leaves(&self) -> impl Iterator<Item = (NodeId, usize)> + '_ {
        self.leaf_of.iter().map(|(n, c)| (*n, *c))
    }

    fn ancestors(&self, mut c: usize) -> Vec<usize> {
        let mut out = vec![c];
        while let Some(p) = self.clusters[c].parent {
            out.push(p);
            c = p;
        }
        out
    }

    /// Clusters on the tree path from `u`'s leaf to `v`'s leaf: the upward
    /// part (each entered via its edge to the parent) and the downward part.
    fn tree_path(&self, u: NodeId, v: NodeId) -> (Vec<usize>, Vec<usize>) {
        let up = self.ancestors(self.leaf(u));
        let down = self.ancestors(self.leaf(v));
        let mut i = up.len();
        let mut j = down.len();
        while i > 0 && j > 0 && up[i - 1] == down[j - 1] {
            i -= 1;
            j -= 1;
        }
        (up[..i].to_vec(), down[..j].to_vec())
    }

    /// Concatenation of the physical routes of the tree edges between the two
    /// leaves, before loop removal. `None` if the leaves lie in different
    /// components.
    pub fn physical_walk(&self, u: NodeId, v: NodeId) -> Option<Walk> {
        let (up, down) = self.tree_path(u, v);
        let mut w = Walk::trivial(u);
        for c in up {
            w.extend(self.clusters[c].edge_path.as_ref()?);
        }
        for c in down.into_iter().rev() {
            w.extend(&self.clusters[c].edge_path.as_ref()?.reversed());
        }
        Some(w)
    }

    /// Tree-metric distance between two leaves.
    pub fn tree_distance(&self, u: NodeId, v: NodeId, lengths: &[f64]) -> f64 {
        self.physical_walk(u, v).map_or(f64::INFINITY, |w| w.length(|e| lengths[e.index()]))
    }

    /// Readable dump, one cluster per line.
    pub fn to_text(&self, topo: &Topology) -> String {
        let mut out = String::new();
        for (i, c) in self.clusters.iter().enumerate() {
            let members: Vec<&str> = c.members.iter().map(|n| topo.node_name(*n)).collect();
            let _ = write!(out, "cluster {i} rep={} members={}", topo.node_name(c.representative), members.join(","));
            if let Some(p) = c.parent {
                let _ = write!(out, " parent={p}");
            }
            if let Some(w) = &c.edge_path {
                let hops: Vec<&str> = w.nodes.iter().map(|n| topo.node_name(*n)).collect();
                let _ = write!(out, " path={}", hops.join(">"));
            }
            out.push('\n');
        }
        out
    }
}

fn all_pairs(topo: &Topology, lengths: &[f64]) -> BTreeMap<NodeId, SpTree> {
    topo.switches().iter().map(|&s| (s, sp_tree(topo, lengths, s, None))).collect()
}

/// One FRT decomposition tree under the given per-edge lengths.
///
/// A random permutation of the switches and a scale `β` (log-uniform on
/// `[1, 2)`) are drawn. At level `i` every node joins the first switch in
/// permutation order within distance `β·2^i`, refining its parent cluster;
/// levels run down until clusters are single switches. Single-child chains
/// are collapsed.
pub fn frt_tree(topo: &Topology, lengths: &[f64], seed: u64) -> RoutingTree {
    let trees = all_pairs(topo, lengths);
    frt_with(topo, lengths, &trees, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn frt_with(topo: &Topology, lengths: &[f64], trees: &BTreeMap<NodeId, SpTree>, rng: &mut ChaCha8Rng) -> RoutingTree {
    let switches: Vec<NodeId> = topo.switches().to_vec();
    let d = |a: NodeId, b: NodeId| trees[&b].dist[a.index()];

    let mut perm = switches.clone();
    perm.shuffle(rng);
    let beta = 2f64.powf(rng.random::<f64>());
    let mut priority = vec![usize::MAX; topo.node_count()];
    for (i, s) in perm.iter().enumerate() {
        priority[s.index()] = i;
    }

    let mut dmin = f64::INFINITY;
    let mut dmax: f64 = 0.0;
    for &a in &switches {
        for &b in &switches {
            let x = d(a, b);
            if a != b && x.is_finite() && x > 0.0 {
                dmin = dmin.min(x);
                dmax = dmax.max(x);
            }
        }
    }
    // zero-length links make their endpoints indistinguishable to the
    // metric; give them the smallest positive scale instead
    if !dmin.is_finite() {
        dmin = 1.0;
    }
    let scaled = |a: NodeId, b: NodeId| d(a, b) / dmin;
    let top = ((dmax / dmin).max(1.0)).log2().ceil() as i32;

    let rep_of = |members: &[NodeId]| *members.iter().min_by_key(|m| priority[m.index()]).unwrap();
    let mut clusters = vec![Cluster {
        members: switches.clone(),
        parent: None,
        children: Vec::new(),
        representative: rep_of(&switches),
        edge_path: None,
    }];
    let mut frontier = vec![0usize];
    let mut level = top;
    while !frontier.is_empty() {
        let radius = beta * 2f64.powi(level);
        let mut next = Vec::new();
        for &c in &frontier {
            if clusters[c].members.len() == 1 {
                continue;
            }
            let mut parts: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
            for &v in &clusters[c].members {
                // below scale 1/2 only zero-distance nodes would still share
                // a cluster; split them by priority
                let center = if level < -1 {
                    priority[v.index()]
                } else {
                    perm.iter().position(|&p| scaled(p, v) <= radius).expect("a node is within any radius of itself")
                };
                parts.entry(center).or_default().push(v);
            }
            // identical child: descend a level without a new node
            if parts.len() == 1 {
                next.push(c);
                continue;
            }
            for (_, members) in parts {
                let idx = clusters.len();
                clusters.push(Cluster {
                    representative: rep_of(&members),
                    members,
                    parent: Some(c),
                    children: Vec::new(),
                    edge_path: None,
                });
                next.push(idx);
            }
        }
        frontier = next;
        level -= 1;
    }

    for i in 1..clusters.len() {
        let p = clusters[i].parent.unwrap();
        let target = clusters[p].representative;
        clusters[i].edge_path = trees[&target].walk(topo, lengths, clusters[i].representative, None);
    }
    RoutingTree::from_clusters(clusters)
}

/// Capacity-weighted average stretch over enabled switch links.
///
/// The stretch of a link `(u, v)` is the tree distance between `u` and `v`
/// divided by their shortest-path distance under `lengths`.
pub fn stretch(tree: &RoutingTree, topo: &Topology, lengths: &[f64]) -> f64 {
    let sp: BTreeMap<NodeId, SpTree> = all_pairs(topo, lengths);
    let mut num = 0.0;
    let mut den = 0.0;
    for l in topo.core_links().filter(|l| topo.is_enabled(*l)) {
        let (u, v) = topo.link_endpoints(l);
        let direct = sp[&v].dist[u.index()];
        let via_tree = tree.tree_distance(u, v, lengths);
        let s = if direct > 0.0 { via_tree / direct } else { 1.0 };
        let c = topo.link_capacity(l);
        num += c * s;
        den += c;
    }
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Per-link utilization bound `u(e, T)`: for each tree edge, the capacity
/// leaving its child cluster, charged to every link on its physical route and
/// divided by the link's capacity.
pub fn tree_utilization(tree: &RoutingTree, topo: &Topology) -> Vec<f64> {
    let mut inside = vec![false; topo.node_count()];
    let mut load = vec![0.0; topo.link_count()];
    for c in &tree.clusters {
        let Some(w) = &c.edge_path else { continue };
        for m in &c.members {
            inside[m.index()] = true;
        }
        let boundary: f64 = topo
            .core_links()
            .filter(|l| topo.is_enabled(*l))
            .filter(|l| {
                let (a, b) = topo.link_endpoints(*l);
                inside[a.index()] != inside[b.index()]
            })
            .map(|l| topo.link_capacity(l))
            .sum();
        for m in &c.members {
            inside[m.index()] = false;
        }
        for e in &w.edges {
            load[e.link().index()] += boundary;
        }
    }
    for l in topo.links() {
        load[l.index()] /= topo.link_capacity(l);
    }
    load
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaeckeConfig {
    pub epsilon: f64,
    /// Multiplier on `ln(m)/ε` for the per-link accumulated utilization that
    /// ends the construction.
    pub utilization_threshold: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for RaeckeConfig {
    fn default() -> Self {
        RaeckeConfig { epsilon: 0.1, utilization_threshold: 1.0, max_iterations: 200, seed: 0 }
    }
}

/// Diagnostic record of one construction round.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub u_max: f64,
    pub argmax: Option<LinkId>,
    pub trees: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeDistribution {
    pub trees: Vec<(RoutingTree, f64)>,
    /// Final per-edge lengths, indexed by edge id.
    pub lengths_final: Vec<f64>,
    pub initial_lengths: Vec<f64>,
    /// False when `max_iterations` ended the loop.
    pub converged: bool,
    pub trace: Vec<IterationTrace>,
}

impl TreeDistribution {
    /// Fails with [`RaeckeError::IterationLimit`] if the iteration cap was hit.
    pub fn check(&self) -> Result<(), RaeckeError> {
        if self.converged {
            Ok(())
        } else {
            Err(RaeckeError::IterationLimit(self.trace.len()))
        }
    }

    /// Stable text form: probabilities, final lengths and each tree.
    pub fn to_text(&self, topo: &Topology) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "trees {} converged {}", self.trees.len(), self.converged);
        for (i, (t, p)) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {i} probability {p:?}");
            out.push_str(&t.to_text(topo));
        }
        for (i, l) in self.lengths_final.iter().enumerate() {
            let _ = writeln!(out, "length {i} {l:?}");
        }
        out
    }

    pub fn trace_text(&self, topo: &Topology) -> String {
        let mut out = String::new();
        for t in &self.trace {
            let arg = t.argmax.map_or_else(|| "-".to_string(), |l| topo.link_label(l));
            let _ = writeln!(out, "iteration {} u_max {:.6} argmax {} trees {}", t.iteration, t.u_max, arg, t.trees);
        }
        out
    }
}

pub fn raecke_distribution(topo: &Topology, cfg: &RaeckeConfig) -> Result<TreeDistribution, RaeckeError> {
    if !(cfg.epsilon > 0.0) || !(cfg.utilization_threshold > 0.0) || cfg.max_iterations == 0 {
        return Err(RaeckeError::InvalidConfig(format!("{cfg:?}")));
    }
    let links: Vec<LinkId> = topo.core_links().filter(|l| topo.is_enabled(*l)).collect();
    let mut lengths: Vec<f64> = topo.edges().iter().map(|e| 1.0 / e.capacity).collect();
    let initial_lengths = lengths.clone();
    let limit = cfg.utilization_threshold * (links.len().max(2) as f64).ln() / cfg.epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut combined = vec![0.0; topo.link_count()];
    let mut trees: Vec<(RoutingTree, f64)> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;

    for iteration in 0..cfg.max_iterations {
        let sp = all_pairs(topo, &lengths);
        let mut tree_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
        let tree = frt_with(topo, &lengths, &sp, &mut tree_rng);
        let u = tree_utilization(&tree, topo);
        let (argmax, u_max) = links
            .iter()
            .map(|l| (*l, u[l.index()]))
            .fold((None, 0.0), |acc, (l, x)| if x > acc.1 { (Some(l), x) } else { acc });
        if u_max <= 0.0 {
            // a single switch or no usable links: one tree carries everything
            trees.push((tree, 1.0));
            trace.push(IterationTrace { iteration, u_max, argmax, trees: trees.len() });
            converged = true;
            break;
        }
        trees.push((tree, 1.0 / u_max));
        trace.push(IterationTrace { iteration, u_max, argmax, trees: trees.len() });
        for l in &links {
            let r = u[l.index()] / u_max;
            combined[l.index()] += r;
            let (a, b) = l.edges();
            let f = (1.0 + cfg.epsilon).powf(r);
            lengths[a.index()] *= f;
            lengths[b.index()] *= f;
        }
        if links.iter().any(|l| combined[l.index()] >= limit) {
            converged = true;
            break;
        }
    }

    let total: f64 = trees.iter().map(|(_, w)| w).sum();
    for (_, w) in trees.iter_mut() {
        *w /= total;
    }
    Ok(TreeDistribution { trees, lengths_final: lengths, initial_lengths, converged, trace })
}

/// Per host pair, the mixture of the physical routes every tree induces.
/// Pairs whose switches are disconnected are left out.
pub fn paths_from_distribution(dist: &TreeDistribution, topo: &Topology) -> RoutingScheme {
    let mut by_switch: BTreeMap<(NodeId, NodeId), BTreeMap<Walk, f64>> = BTreeMap::new();
    let mut scheme = RoutingScheme::new();
    for (s, t) in topo.host_pairs() {
        let key = (topo.host_switch(s), topo.host_switch(t));
        let mix = by_switch.entry(key).or_insert_with(|| {
            let mut m: BTreeMap<Walk, f64> = BTreeMap::new();
            for (tree, p) in &dist.trees {
                if let Some(w) = tree.physical_walk(key.0, key.1) {
                    *m.entry(w.shortcut()).or_insert(0.0) += p;
                }
            }
            m
        });
        let d: PathDistribution = mix.iter().map(|(w, p)| (w.between_hosts(topo, s, t), *p)).collect();
        scheme.insert(s, t, d);
    }
    scheme
}

/// Convenience: Räcke scheme for a topology.
pub fn raecke_scheme(topo: &Topology, cfg: &RaeckeConfig) -> Result<RoutingScheme, RaeckeError> {
    Ok(paths_from_distribution(&raecke_distribution(topo, cfg)?, topo))
}

/// Links whose removal disconnects the switch graph.
pub fn bridges(topo: &Topology) -> Vec<LinkId> {
    topo.core_links()
        .filter(|l| topo.is_enabled(*l) && !topo.connected_without(&[*l].into()))
        .collect()
}
