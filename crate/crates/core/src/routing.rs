//! Oblivious baseline path selectors: SPF, ECMP, KSP and VLB.
//!
//! All selectors route on the switch subgraph and then attach the host stub
//! edges at both ends.

use std::collections::BTreeMap;

use crate::error::RoutingError;
use crate::graph::{cmp_routes, sp_tree, AllPairs, Mask};
use crate::model::{NodeId, PathDistribution, RoutingScheme, Topology, Walk};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KspConfig {
    pub k: usize,
}

impl Default for KspConfig {
    fn default() -> Self {
        KspConfig { k: 4 }
    }
}

/// What to do with host pairs that have no route, which can only happen on
/// failure-reduced topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    /// Fail with [`RoutingError::UnreachablePair`].
    All,
    /// Leave the pair out of the scheme.
    Reachable,
}

fn assemble<F>(topo: &Topology, coverage: Coverage, mut routes: F) -> Result<RoutingScheme, RoutingError>
where
    F: FnMut(NodeId, NodeId) -> Vec<(Walk, f64)>,
{
    let mut per_switch: BTreeMap<(NodeId, NodeId), Vec<(Walk, f64)>> = BTreeMap::new();
    let mut scheme = RoutingScheme::new();
    for (s, t) in topo.host_pairs() {
        let key = (topo.host_switch(s), topo.host_switch(t));
        let walks = per_switch.entry(key).or_insert_with(|| routes(key.0, key.1));
        if walks.is_empty() {
            match coverage {
                Coverage::All => {
                    return Err(RoutingError::UnreachablePair {
                        src: topo.node_name(s).to_string(),
                        dst: topo.node_name(t).to_string(),
                    })
                }
                Coverage::Reachable => continue,
            }
        }
        let mut dist = PathDistribution::new();
        for (w, p) in walks.iter() {
            *dist.entry(w.between_hosts(topo, s, t)).or_insert(0.0) += p;
        }
        scheme.insert(s, t, dist);
    }
    Ok(scheme)
}

fn uniform(walks: Vec<Walk>) -> Vec<(Walk, f64)> {
    let p = 1.0 / walks.len().max(1) as f64;
    walks.into_iter().map(|w| (w, p)).collect()
}

/// One shortest path per pair by latency weight, ties broken by hop count and
/// then by node-name sequence.
pub fn spf(topo: &Topology) -> Result<RoutingScheme, RoutingError> {
    spf_with(topo, Coverage::All)
}

pub fn spf_with(topo: &Topology, coverage: Coverage) -> Result<RoutingScheme, RoutingError> {
    let ap = AllPairs::latency(topo);
    assemble(topo, coverage, |a, b| ap.walk(topo, a, b).map(|w| vec![(w, 1.0)]).unwrap_or_default())
}

/// Every minimum-latency simple path, split uniformly.
pub fn ecmp(topo: &Topology) -> Result<RoutingScheme, RoutingError> {
    ecmp_with(topo, Coverage::All)
}

pub fn ecmp_with(topo: &Topology, coverage: Coverage) -> Result<RoutingScheme, RoutingError> {
    let ap = AllPairs::latency(topo);
    assemble(topo, coverage, |a, b| uniform(ap.tree(b).all_tight_walks(topo, &ap.lengths, a)))
}

/// The k shortest loopless paths (Yen), split uniformly.
pub fn ksp(topo: &Topology, cfg: &KspConfig) -> Result<RoutingScheme, RoutingError> {
    ksp_with(topo, cfg, Coverage::All)
}

pub fn ksp_with(topo: &Topology, cfg: &KspConfig, coverage: Coverage) -> Result<RoutingScheme, RoutingError> {
    if cfg.k == 0 {
        return Err(RoutingError::InvalidK);
    }
    let ap = AllPairs::latency(topo);
    assemble(topo, coverage, |a, b| uniform(yen(topo, &ap, a, b, cfg.k)))
}

fn walk_cost(w: &Walk, lengths: &[f64]) -> f64 {
    w.edges.iter().map(|e| lengths[e.index()]).sum()
}

/// Yen's algorithm. Paths come out in (cost, hops, node sequence) order, so
/// the first one is always the SPF route.
pub fn yen(topo: &Topology, ap: &AllPairs, src: NodeId, dst: NodeId, k: usize) -> Vec<Walk> {
    let lengths = &ap.lengths;
    let Some(first) = ap.walk(topo, src, dst) else {
        return Vec::new();
    };
    let mut found = vec![first];
    let mut candidates: Vec<(f64, Walk)> = Vec::new();
    while found.len() < k {
        let prev = found.last().unwrap().clone();
        for i in 0..prev.edges.len() {
            let spur = prev.nodes[i];
            let root = Walk { nodes: prev.nodes[..=i].to_vec(), edges: prev.edges[..i].to_vec() };
            let mut mask = Mask::new(topo);
            for p in &found {
                if p.nodes.len() > i + 1 && p.nodes[..=i] == root.nodes[..] && p.edges[..i] == root.edges[..] {
                    mask.edges[p.edges[i].index()] = true;
                }
            }
            for n in &root.nodes[..i] {
                mask.nodes[n.index()] = true;
            }
            let tree = sp_tree(topo, lengths, dst, Some(&mask));
            let Some(spur_walk) = tree.walk(topo, lengths, spur, Some(&mask)) else {
                continue;
            };
            let mut total = root;
            total.extend(&spur_walk);
            if !found.contains(&total) && !candidates.iter().any(|(_, w)| *w == total) {
                candidates.push((walk_cost(&total, lengths), total));
            }
        }
        let Some(best) = (0..candidates.len())
            .min_by(|&a, &b| cmp_routes(candidates[a].0, &candidates[a].1, candidates[b].0, &candidates[b].1))
        else {
            break;
        };
        found.push(candidates.swap_remove(best).1);
    }
    found
}

/// Valiant load balancing: one route through each intermediate switch,
/// built from two shortest paths with loops shortcut. Duplicates merge.
pub fn vlb(topo: &Topology) -> Result<RoutingScheme, RoutingError> {
    vlb_with(topo, Coverage::All)
}

pub fn vlb_with(topo: &Topology, coverage: Coverage) -> Result<RoutingScheme, RoutingError> {
    if topo.switches().len() < 2 {
        return Err(RoutingError::TooFewSwitches);
    }
    let ap = AllPairs::latency(topo);
    assemble(topo, coverage, |a, b| {
        let Some(direct) = ap.walk(topo, a, b) else {
            return Vec::new();
        };
        let mut merged: BTreeMap<Walk, f64> = BTreeMap::new();
        let mids: Vec<NodeId> = topo
            .switches()
            .iter()
            .copied()
            .filter(|&i| i != a && i != b && ap.distance(a, i).is_finite())
            .collect();
        for &i in &mids {
            let mut w = ap.walk(topo, a, i).unwrap();
            w.extend(&ap.walk(topo, i, b).unwrap());
            *merged.entry(w.shortcut()).or_insert(0.0) += 1.0 / mids.len() as f64;
        }
        if merged.is_empty() {
            merged.insert(direct, 1.0);
        }
        merged.into_iter().collect()
    })
}

/// Scheme for an oblivious selector by name, used by the simulator.
pub fn oblivious(
    topo: &Topology,
    kind: crate::model::PathSelector,
    ksp_cfg: &KspConfig,
    coverage: Coverage,
) -> Option<Result<RoutingScheme, RoutingError>> {
    use crate::model::PathSelector::*;
    match kind {
        Spf => Some(spf_with(topo, coverage)),
        Ecmp => Some(ecmp_with(topo, coverage)),
        Ksp => Some(ksp_with(topo, ksp_cfg, coverage)),
        Vlb => Some(vlb_with(topo, coverage)),
        Raecke | Mcf | Mw => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_scheme, TopologyBuilder};

    fn with_hosts(b: TopologyBuilder) -> Topology {
        b.hosts_on_every_switch(1e3).build().unwrap()
    }

    fn names(topo: &Topology, s: &RoutingScheme, a: &str, b: &str) -> Vec<(String, f64)> {
        let (a, b) = (topo.node_id(a).unwrap(), topo.node_id(b).unwrap());
        s.get(a, b).unwrap().iter().map(|(p, w)| (p.display(topo).to_string(), *w)).collect()
    }

    fn triangle() -> Topology {
        with_hosts(
            TopologyBuilder::new("tri")
                .switch("A")
                .switch("B")
                .switch("C")
                .link("A", "B", 10.0, 1.0)
                .link("B", "C", 10.0, 1.0)
                .link("A", "C", 10.0, 1.0),
        )
    }

    fn diamond() -> Topology {
        with_hosts(
            TopologyBuilder::new("diamond")
                .switch("S")
                .switch("A")
                .switch("B")
                .switch("T")
                .link("S", "A", 10.0, 1.0)
                .link("A", "T", 10.0, 1.0)
                .link("S", "B", 10.0, 1.0)
                .link("B", "T", 10.0, 1.0),
        )
    }

    fn line() -> Topology {
        with_hosts(
            TopologyBuilder::new("line")
                .switch("A")
                .switch("B")
                .switch("C")
                .switch("D")
                .link("A", "B", 10.0, 1.0)
                .link("B", "C", 10.0, 1.0)
                .link("C", "D", 10.0, 1.0),
        )
    }

    #[test]
    fn spf_examples() {
        let t = triangle();
        let s = spf(&t).unwrap();
        assert_eq!(names(&t, &s, "h-A", "h-C"), vec![("h-A>A>C>h-C".into(), 1.0)]);
        let l = line();
        let s = spf(&l).unwrap();
        assert_eq!(names(&l, &s, "h-A", "h-D"), vec![("h-A>A>B>C>D>h-D".into(), 1.0)]);
        assert!(validate_scheme(&s, &l).is_empty());
    }

    #[test]
    fn ecmp_examples() {
        let d = diamond();
        let s = ecmp(&d).unwrap();
        assert_eq!(
            names(&d, &s, "h-S", "h-T"),
            vec![("h-S>S>A>T>h-T".into(), 0.5), ("h-S>S>B>T>h-T".into(), 0.5)]
        );
        let l = line();
        assert_eq!(ecmp(&l).unwrap(), spf(&l).unwrap());
    }

    #[test]
    fn ksp_examples() {
        let d = diamond();
        let s = ksp(&d, &KspConfig { k: 2 }).unwrap();
        assert_eq!(names(&d, &s, "h-S", "h-T").len(), 2);
        let l = line();
        let s = ksp(&l, &KspConfig { k: 3 }).unwrap();
        assert_eq!(names(&l, &s, "h-A", "h-D"), vec![("h-A>A>B>C>D>h-D".into(), 1.0)]);
        assert_eq!(ksp(&d, &KspConfig { k: 0 }), Err(RoutingError::InvalidK));
    }

    #[test]
    fn vlb_examples() {
        let t = with_hosts(
            TopologyBuilder::new("tri")
                .switch("X")
                .switch("Y")
                .switch("Z")
                .host("hx")
                .host("hz")
                .link("X", "Y", 10.0, 1.0)
                .link("Y", "Z", 10.0, 1.0)
                .link("X", "Z", 10.0, 1.0)
                .link("hx", "X", 10.0, 0.0)
                .link("hz", "Z", 10.0, 0.0),
        );
        let s = vlb(&t).unwrap();
        assert_eq!(names(&t, &s, "hx", "hz"), vec![("hx>X>Y>Z>hz".into(), 1.0)]);

        let d = diamond();
        let s = vlb(&d).unwrap();
        assert_eq!(
            names(&d, &s, "h-S", "h-T"),
            vec![("h-S>S>A>T>h-T".into(), 0.5), ("h-S>S>B>T>h-T".into(), 0.5)]
        );
    }

    #[test]
    fn two_switches_fall_back_to_the_direct_route() {
        let t = with_hosts(TopologyBuilder::new("pair").switch("a").switch("b").link("a", "b", 1.0, 1.0));
        assert_eq!(vlb(&t).unwrap(), spf(&t).unwrap());
    }

    #[test]
    fn unreachable_pairs() {
        let t = line();
        let cut = t.with_failed(&[crate::model::LinkId(1)].into());
        assert!(matches!(spf(&cut), Err(RoutingError::UnreachablePair { .. })));
        let partial = spf_with(&cut, Coverage::Reachable).unwrap();
        assert_eq!(partial.len(), 2 + 2);
        assert!(validate_scheme(&partial, &cut).is_empty());
    }
}
