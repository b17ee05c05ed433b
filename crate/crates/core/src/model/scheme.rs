//! Routing schemes: per host pair, a probability distribution over paths.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::path::Path;
use super::topology::{NodeId, Topology};
use super::traffic::TrafficMatrix;

/// Tolerance on the probability mass of a scheme entry.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

pub type PathDistribution = BTreeMap<Path, f64>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoutingScheme {
    entries: BTreeMap<(NodeId, NodeId), PathDistribution>,
}

impl RoutingScheme {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a pair's distribution after dropping non-positive weights and
    /// renormalizing. Empty distributions leave the pair unrouted.
    pub fn insert(&mut self, src: NodeId, dst: NodeId, dist: PathDistribution) {
        let mut dist: PathDistribution = dist.into_iter().filter(|(_, p)| *p > 0.0).collect();
        normalize(&mut dist);
        if dist.is_empty() {
            self.entries.remove(&(src, dst));
        } else {
            self.entries.insert((src, dst), dist);
        }
    }

    /// Inserts an entry verbatim, without renormalization.
    pub fn insert_raw(&mut self, src: NodeId, dst: NodeId, dist: PathDistribution) {
        self.entries.insert((src, dst), dist);
    }

    pub fn get(&self, src: NodeId, dst: NodeId) -> Option<&PathDistribution> {
        self.entries.get(&(src, dst))
    }

    pub fn remove(&mut self, src: NodeId, dst: NodeId) -> Option<PathDistribution> {
        self.entries.remove(&(src, dst))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &PathDistribution)> {
        self.entries.iter()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn path_count(&self) -> usize {
        self.entries.values().map(|d| d.len()).sum()
    }

    pub fn mean_paths_per_pair(&self) -> f64 {
        if self.entries.is_empty() {
            0.0
        } else {
            self.path_count() as f64 / self.entries.len() as f64
        }
    }

    pub fn max_paths_per_pair(&self) -> usize {
        self.entries.values().map(|d| d.len()).max().unwrap_or(0)
    }

    /// The set of paths for each pair, probabilities discarded.
    pub fn path_sets(&self) -> BTreeMap<(NodeId, NodeId), BTreeSet<Path>> {
        self.entries.iter().map(|(k, d)| (*k, d.keys().cloned().collect())).collect()
    }

    /// Whether every path of `self` also appears for the same pair in `other`.
    pub fn paths_subset_of(&self, other: &RoutingScheme) -> bool {
        self.entries.iter().all(|(k, d)| match other.entries.get(k) {
            Some(o) => d.keys().all(|p| o.contains_key(p)),
            None => d.is_empty(),
        })
    }

    /// Mean hop count over all paths, each path counted once.
    pub fn mean_hops(&self) -> f64 {
        let n = self.path_count();
        if n == 0 {
            return 0.0;
        }
        self.entries.values().flat_map(|d| d.keys()).map(|p| p.hops() as f64).sum::<f64>() / n as f64
    }

    /// Offered load per directed edge when `tm` is routed by this scheme.
    /// Pairs without an entry contribute nothing.
    pub fn edge_loads(&self, topo: &Topology, tm: &TrafficMatrix) -> Vec<f64> {
        let mut loads = vec![0.0; topo.edge_count()];
        for ((s, t), dist) in &self.entries {
            let d = tm.get(*s, *t);
            if d == 0.0 {
                continue;
            }
            for (path, p) in dist {
                for e in path.edges() {
                    loads[e.index()] += d * p;
                }
            }
        }
        loads
    }

    /// Offered load divided by capacity, per directed edge.
    pub fn edge_utilization(&self, topo: &Topology, tm: &TrafficMatrix) -> Vec<f64> {
        let mut u = self.edge_loads(topo, tm);
        for (i, e) in topo.edges().iter().enumerate() {
            u[i] /= e.capacity;
        }
        u
    }

    /// Maximum offered utilization over all edges, failed or not.
    pub fn max_congestion(&self, topo: &Topology, tm: &TrafficMatrix) -> f64 {
        self.edge_utilization(topo, tm).into_iter().fold(0.0, f64::max)
    }

    /// Deterministic text listing: one `pair` header per entry followed by
    /// `probability path` lines.
    pub fn to_text(&self, topo: &Topology) -> String {
        let mut out = String::new();
        for ((s, t), dist) in &self.entries {
            let _ = writeln!(out, "pair {} {}", topo.node_name(*s), topo.node_name(*t));
            for (path, p) in dist {
                let _ = writeln!(out, "  {:.12} {}", p, path.display(topo));
            }
        }
        out
    }
}

/// Rescales a distribution to sum to one. Empty or zero-mass distributions
/// are cleared.
pub fn normalize(dist: &mut PathDistribution) {
    let total: f64 = dist.values().sum();
    if total <= 0.0 || !total.is_finite() {
        dist.clear();
        return;
    }
    for p in dist.values_mut() {
        *p /= total;
    }
}

/// Keeps the `k` most probable paths per pair and renormalizes. Ties go to
/// the lexicographically smaller node sequence.
pub fn prune_to_budget(scheme: &RoutingScheme, k: usize) -> RoutingScheme {
    assert!(k >= 1, "budget must be at least one path");
    let mut out = RoutingScheme::new();
    for ((s, t), dist) in &scheme.entries {
        if dist.len() <= k {
            // already within budget; renormalizing again would drift by ulps
            out.insert_raw(*s, *t, dist.clone());
            continue;
        }
        let mut ranked: Vec<(&Path, f64)> = dist.iter().map(|(p, w)| (p, *w)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(k);
        let kept: PathDistribution = ranked.into_iter().map(|(p, w)| (p.clone(), w)).collect();
        out.insert(*s, *t, kept);
    }
    out
}

/// Size of the symmetric difference between the two schemes' path sets,
/// summed over pairs. Probabilities are ignored.
pub fn churn(prev: &RoutingScheme, next: &RoutingScheme) -> usize {
    let pairs: BTreeSet<(NodeId, NodeId)> = prev.entries.keys().chain(next.entries.keys()).copied().collect();
    let empty = PathDistribution::new();
    pairs
        .into_iter()
        .map(|k| {
            let a = prev.entries.get(&k).unwrap_or(&empty);
            let b = next.entries.get(&k).unwrap_or(&empty);
            a.keys().filter(|p| !b.contains_key(*p)).count() + b.keys().filter(|p| !a.contains_key(*p)).count()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotHostPair { src: String, dst: String },
    ProbabilityOutOfRange { src: String, dst: String, path: String, probability: f64 },
    NotNormalized { src: String, dst: String, total: f64 },
    EmptyPath { src: String, dst: String },
    NotContiguous { src: String, dst: String, path: String },
    WrongEndpoints { src: String, dst: String, path: String },
    NotSimple { src: String, dst: String, path: String },
    UnknownEdge { src: String, dst: String },
}

/// Checks every scheme invariant against `topo`. An empty result means the
/// scheme is valid.
pub fn validate_scheme(scheme: &RoutingScheme, topo: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = topo.node_count() as u32;
    for ((s, t), dist) in &scheme.entries {
        if s.0 >= n || t.0 >= n {
            out.push(Violation::NotHostPair { src: format!("#{}", s.0), dst: format!("#{}", t.0) });
            continue;
        }
        let src = topo.node_name(*s).to_string();
        let dst = topo.node_name(*t).to_string();
        if !topo.is_host(*s) || !topo.is_host(*t) || s == t {
            out.push(Violation::NotHostPair { src: src.clone(), dst: dst.clone() });
        }
        let total: f64 = dist.values().sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            out.push(Violation::NotNormalized { src: src.clone(), dst: dst.clone(), total });
        }
        for (path, p) in dist {
            if path.edges().is_empty() {
                out.push(Violation::EmptyPath { src: src.clone(), dst: dst.clone() });
                continue;
            }
            if path.edges().iter().any(|e| e.index() >= topo.edge_count())
                || path.nodes().iter().any(|v| v.0 >= n)
            {
                out.push(Violation::UnknownEdge { src: src.clone(), dst: dst.clone() });
                continue;
            }
            let shown = path.display(topo).to_string();
            if !(*p > 0.0 && *p <= 1.0 + PROBABILITY_TOLERANCE) {
                out.push(Violation::ProbabilityOutOfRange {
                    src: src.clone(),
                    dst: dst.clone(),
                    path: shown.clone(),
                    probability: *p,
                });
            }
            if !path.is_contiguous(topo) {
                out.push(Violation::NotContiguous { src: src.clone(), dst: dst.clone(), path: shown });
                continue;
            }
            if path.src() != *s || path.dst() != *t {
                out.push(Violation::WrongEndpoints { src: src.clone(), dst: dst.clone(), path: shown.clone() });
            }
            if !path.is_simple() {
                out.push(Violation::NotSimple { src: src.clone(), dst: dst.clone(), path: shown });
            }
        }
    }
    out
}
