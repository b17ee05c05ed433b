//! Min-max-congestion multi-commodity flow.
//!
//! The solver minimizes a soft maximum of link utilizations,
//! `Φ(u) = Σ_e exp(α·u_e)`, by repeatedly shifting each commodity's flow
//! towards its cheapest path under the exponential edge prices
//! `y_e = exp(α·u_e)/c_e` (an exact line search along the shift direction).
//! The same prices certify optimality: for any `y ≥ 0`,
//! `OPT ≥ Σ_k d_k·dist_y(k) / Σ_e c_e·y_e`, and the loop stops once the
//! primal congestion is within `1 + accuracy` of the best such bound.
//!
//! Restricting the cheapest-path oracle to a fixed base path set gives the
//! semi-oblivious variant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::McfError;
use crate::graph::sp_tree;
use crate::model::{EdgeId, LinkId, NodeId, Path, PathDistribution, RoutingScheme, Topology, TrafficMatrix};
use crate::routing::{spf_with, Coverage};

/// Probability below which a path is dropped from a solution.
pub const PRUNE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwConfig {
    /// Multiplicative optimality gap, in `(0, 0.5]`.
    pub accuracy: f64,
    pub max_phases: usize,
    pub seed: u64,
    /// Turn an uncertified result into [`McfError::PhaseLimit`].
    pub strict: bool,
}

impl Default for MwConfig {
    fn default() -> Self {
        MwConfig { accuracy: 0.05, max_phases: 5000, seed: 0, strict: false }
    }
}

impl MwConfig {
    fn validate(&self) -> Result<(), McfError> {
        if !(self.accuracy > 0.0 && self.accuracy <= 0.5) || self.max_phases == 0 {
            return Err(McfError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub scheme: RoutingScheme,
    pub max_congestion: f64,
    /// Utilization per directed edge, indexed by edge id.
    pub per_edge_util: Vec<f64>,
    /// Wall-clock seconds spent solving.
    pub solve_time: f64,
    /// Best certified lower bound on the optimum.
    pub lower_bound: f64,
    pub phases: usize,
    /// Whether the gap certificate was reached.
    pub converged: bool,
}

impl FlowSolution {
    pub fn gap(&self) -> f64 {
        if self.lower_bound > 0.0 {
            self.max_congestion / self.lower_bound - 1.0
        } else {
            0.0
        }
    }

    pub fn check(&self) -> Result<(), McfError> {
        if self.converged {
            Ok(())
        } else {
            Err(McfError::PhaseLimit { phases: self.phases, gap: self.gap() })
        }
    }

    pub fn to_text(&self, topo: &Topology) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "max_congestion {}", self.max_congestion);
        let _ = writeln!(out, "solve_time {:.6}", self.solve_time);
        out.push_str(&self.scheme.to_text(topo));
        out
    }
}

struct Commodity {
    src: NodeId,
    dst: NodeId,
    demand: f64,
    flows: Vec<(Path, f64)>,
    base: Option<Vec<Path>>,
}

struct State<'a> {
    topo: &'a Topology,
    caps: Vec<f64>,
    live: Vec<bool>,
    load: Vec<f64>,
}

impl State<'_> {
    fn lambda(&self) -> f64 {
        (0..self.load.len()).filter(|&e| self.live[e]).map(|e| self.load[e] / self.caps[e]).fold(0.0, f64::max)
    }

    fn prices(&self, alpha: f64, lam: f64) -> Vec<f64> {
        (0..self.load.len())
            .map(|e| if self.live[e] { (alpha * (self.load[e] / self.caps[e] - lam)).exp() / self.caps[e] } else { 0.0 })
            .collect()
    }

    fn apply(&mut self, path: &Path, amount: f64) {
        for e in path.edges() {
            self.load[e.index()] += amount;
        }
    }

    /// Moves up to `avail` from `from` to `to`, minimizing the potential.
    fn shift(&mut self, alpha: f64, from: &Path, to: &Path, avail: f64) -> f64 {
        let fs: BTreeSet<EdgeId> = from.edges().iter().copied().collect();
        let ts: BTreeSet<EdgeId> = to.edges().iter().copied().collect();
        let gain: Vec<usize> = ts.difference(&fs).map(|e| e.index()).collect();
        let lose: Vec<usize> = fs.difference(&ts).map(|e| e.index()).collect();
        if gain.is_empty() && lose.is_empty() {
            return 0.0;
        }
        // derivative of the potential in the shifted amount, rescaled by a
        // common positive factor so it never overflows
        let slope = |x: f64| {
            let exps: Vec<(f64, f64)> = gain
                .iter()
                .map(|&e| (alpha * (self.load[e] + x) / self.caps[e], 1.0 / self.caps[e]))
                .chain(lose.iter().map(|&e| (alpha * (self.load[e] - x) / self.caps[e], -1.0 / self.caps[e])))
                .collect();
            let m = exps.iter().map(|(a, _)| *a).fold(f64::NEG_INFINITY, f64::max);
            exps.iter().map(|(a, w)| w * (a - m).exp()).sum::<f64>()
        };
        if slope(0.0) >= 0.0 {
            return 0.0;
        }
        let delta = if slope(avail) <= 0.0 {
            avail
        } else {
            let (mut lo, mut hi) = (0.0, avail);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= avail * 1e-12 {
                    break;
                }
            }
            lo
        };
        for &e in &gain {
            self.load[e] += delta;
        }
        for &e in &lose {
            self.load[e] -= delta;
        }
        delta
    }

    fn cost(path: &Path, y: &[f64]) -> f64 {
        path.edges().iter().map(|e| y[e.index()]).sum()
    }

    /// Cheapest admissible path for `k` under prices `y`.
    fn cheapest(&self, k: &Commodity, y: &[f64]) -> Option<(Path, f64)> {
        match &k.base {
            Some(base) => base
                .iter()
                .map(|p| (p, Self::cost(p, y)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)))
                .map(|(p, c)| (p.clone(), c)),
            None => {
                let (ss, ts) = (self.topo.host_switch(k.src), self.topo.host_switch(k.dst));
                let tree = sp_tree(self.topo, y, ts, None);
                let walk = tree.walk(self.topo, y, ss, None)?;
                let p = walk.between_hosts(self.topo, k.src, k.dst);
                let c = Self::cost(&p, y);
                Some((p, c))
            }
        }
    }
}

fn solve(
    topo: &Topology,
    tm: &TrafficMatrix,
    base: Option<&RoutingScheme>,
    cfg: &MwConfig,
    coverage: Coverage,
) -> Result<FlowSolution, McfError> {
    cfg.validate()?;
    let started = Instant::now();
    let live: Vec<bool> = (0..topo.edge_count()).map(|e| topo.edge_enabled(EdgeId(e as u32))).collect();
    let mut st = State {
        topo,
        caps: topo.edges().iter().map(|e| e.capacity).collect(),
        live,
        load: vec![0.0; topo.edge_count()],
    };

    let mut commodities = Vec::new();
    let mut missing = Vec::new();
    let init_y: Vec<f64> = st.caps.iter().zip(&st.live).map(|(c, l)| if *l { 1.0 / c } else { 0.0 }).collect();
    for ((s, t), d) in tm.positive() {
        let base_paths = base.map(|b| b.get(s, t).map(|dist| dist.keys().cloned().collect::<Vec<_>>()).unwrap_or_default());
        let mut k = Commodity { src: s, dst: t, demand: d, flows: Vec::new(), base: base_paths };
        match &k.base {
            Some(paths) if paths.is_empty() => {
                missing.push((topo.node_name(s).to_string(), topo.node_name(t).to_string()));
                continue;
            }
            Some(paths) => {
                // start on the lowest-latency path; flow only moves to relieve congestion
                let p = paths
                    .iter()
                    .min_by(|a, b| a.latency(topo).total_cmp(&b.latency(topo)).then_with(|| a.cmp(b)))
                    .unwrap();
                k.flows = vec![(p.clone(), d)];
            }
            None => match st.cheapest(&k, &init_y) {
                Some((p, _)) => k.flows = vec![(p, d)],
                None => match coverage {
                    Coverage::All => {
                        return Err(McfError::Unreachable {
                            src: topo.node_name(s).to_string(),
                            dst: topo.node_name(t).to_string(),
                        })
                    }
                    Coverage::Reachable => continue,
                },
            },
        }
        for (p, f) in &k.flows {
            st.apply(p, *f);
        }
        commodities.push(k);
    }
    if !missing.is_empty() {
        return Err(McfError::MissingPaths(missing));
    }

    let live_edges = st.live.iter().filter(|l| **l).count().max(2) as f64;
    let mut eps = cfg.accuracy / 3.0;
    let mut best_lb: f64 = 0.0;
    let mut converged = commodities.is_empty();
    let mut phases = 0;
    let mut prev_lam = f64::INFINITY;
    let mut order: Vec<usize> = (0..commodities.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    while !converged && phases < cfg.max_phases {
        phases += 1;
        let lam = st.lambda();
        let alpha = live_edges.ln() / (eps * lam);
        order.shuffle(&mut rng);
        for &i in &order {
            let lam = st.lambda();
            let y = st.prices(alpha, lam);
            let k = &mut commodities[i];
            let Some((q, _)) = st.cheapest(k, &y) else { continue };
            let qi = match k.flows.iter().position(|(p, _)| *p == q) {
                Some(j) => j,
                None => {
                    k.flows.push((q.clone(), 0.0));
                    k.flows.len() - 1
                }
            };
            for j in 0..k.flows.len() {
                if j == qi || k.flows[j].1 <= 0.0 {
                    continue;
                }
                let moved = st.shift(alpha, &k.flows[j].0, &q, k.flows[j].1);
                k.flows[j].1 -= moved;
                k.flows[qi].1 += moved;
            }
            // drop dust, keeping the commodity's total exact
            let dust = k.demand * 1e-12;
            let mut residue = 0.0;
            for (p, f) in k.flows.iter_mut() {
                if *f <= dust && *p != q {
                    residue += *f;
                    st.apply(p, -*f);
                    *f = 0.0;
                }
            }
            if residue != 0.0 {
                st.apply(&q, residue);
                k.flows.iter_mut().find(|(p, _)| *p == q).unwrap().1 += residue;
            }
            k.flows.retain(|(_, f)| *f > 0.0);
        }

        let lam = st.lambda();
        let y = st.prices(alpha, lam);
        let denom: f64 = (0..y.len()).map(|e| st.caps[e] * y[e]).sum();
        let numer: f64 = commodities
            .iter()
            .map(|k| k.demand * st.cheapest(k, &y).map_or(0.0, |(_, c)| c))
            .sum();
        if denom > 0.0 {
            best_lb = best_lb.max(numer / denom);
        }
        if lam <= (1.0 + cfg.accuracy) * best_lb {
            converged = true;
        } else if prev_lam - lam <= 1e-9 * lam {
            // the smoothed optimum is reached but not certified: sharpen
            eps = (eps * 0.5).max(1e-6);
        }
        prev_lam = lam;
    }

    // zero-demand pairs still get a route
    let mut scheme = RoutingScheme::new();
    let fallback = match base {
        None => Some(spf_with(topo, Coverage::Reachable).map_err(|_| McfError::InvalidConfig("spf".into()))?),
        Some(_) => None,
    };
    let positive: BTreeSet<(NodeId, NodeId)> = commodities.iter().map(|k| (k.src, k.dst)).collect();
    for (s, t) in topo.host_pairs() {
        if positive.contains(&(s, t)) || tm.get(s, t) > 0.0 {
            continue;
        }
        match (&fallback, base) {
            (Some(f), _) => {
                if let Some(d) = f.get(s, t) {
                    scheme.insert(s, t, d.clone());
                }
            }
            (None, Some(b)) => {
                if let Some(d) = b.get(s, t) {
                    let best = d
                        .keys()
                        .min_by(|a, b| a.latency(topo).total_cmp(&b.latency(topo)).then_with(|| a.cmp(b)));
                    if let Some(p) = best {
                        scheme.insert(s, t, [(p.clone(), 1.0)].into());
                    }
                }
            }
            (None, None) => unreachable!(),
        }
    }
    for k in &commodities {
        let mut dist = PathDistribution::new();
        for (p, f) in &k.flows {
            let prob = f / k.demand;
            if prob >= PRUNE_THRESHOLD {
                *dist.entry(p.clone()).or_insert(0.0) += prob;
            }
        }
        scheme.insert(k.src, k.dst, dist);
    }

    let per_edge_util = scheme.edge_utilization(topo, tm);
    let max_congestion = per_edge_util.iter().copied().fold(0.0, f64::max);
    let sol = FlowSolution {
        scheme,
        max_congestion,
        per_edge_util,
        solve_time: started.elapsed().as_secs_f64(),
        lower_bound: best_lb,
        phases,
        converged,
    };
    if cfg.strict {
        sol.check()?;
    }
    Ok(sol)
}

/// Unrestricted min-max-congestion flow. Every pair with positive demand must
/// be reachable.
pub fn mcf_mw(topo: &Topology, tm: &TrafficMatrix, cfg: &MwConfig) -> Result<FlowSolution, McfError> {
    solve(topo, tm, None, cfg, Coverage::All)
}

/// As [`mcf_mw`], silently leaving out pairs with no route.
pub fn mcf_mw_with(
    topo: &Topology,
    tm: &TrafficMatrix,
    cfg: &MwConfig,
    coverage: Coverage,
) -> Result<FlowSolution, McfError> {
    solve(topo, tm, None, cfg, coverage)
}

/// Min-max-congestion flow over the paths of `base` only. Zero-demand pairs
/// keep their lowest-latency base path.
pub fn semi_mcf(
    topo: &Topology,
    tm: &TrafficMatrix,
    base: &RoutingScheme,
    cfg: &MwConfig,
) -> Result<FlowSolution, McfError> {
    solve(topo, tm, Some(base), cfg, Coverage::All)
}

pub fn demand_envelope(tms: &[TrafficMatrix]) -> Result<TrafficMatrix, McfError> {
    let (first, rest) = tms.split_first().ok_or(McfError::EmptyWindow)?;
    Ok(rest.iter().fold(first.clone(), |acc, tm| acc.max_with(tm)))
}

/// Paths (and weights) of the MCF solution for the window's envelope.
pub fn semi_mcf_env(topo: &Topology, window: &[TrafficMatrix], cfg: &MwConfig) -> Result<RoutingScheme, McfError> {
    let env = demand_envelope(window)?;
    Ok(mcf_mw(topo, &env, cfg)?.scheme)
}

/// Core links that can fail one at a time without partitioning the network.
pub fn default_failure_set(topo: &Topology) -> Vec<LinkId> {
    topo.core_links()
        .filter(|l| topo.is_enabled(*l) && topo.connected_without(&[*l].into()))
        .collect()
}

/// Union of the envelope base paths of the intact network and of each
/// single-link failure scenario. A path's weight is its mean probability
/// over the scenarios.
pub fn semi_mcf_ft_env(
    topo: &Topology,
    window: &[TrafficMatrix],
    failure_set: Option<&[LinkId]>,
    cfg: &MwConfig,
) -> Result<RoutingScheme, McfError> {
    let env = demand_envelope(window)?;
    let default_set;
    let failures = match failure_set {
        Some(f) => f,
        None => {
            default_set = default_failure_set(topo);
            &default_set
        }
    };
    for l in failures {
        if !topo.connected_without(&[*l].into()) {
            return Err(McfError::DisconnectedScenario(topo.link_label(*l)));
        }
    }
    let mut scenarios = vec![mcf_mw(topo, &env, cfg)?.scheme];
    for l in failures {
        let reduced = topo.with_failed(&[*l].into());
        scenarios.push(mcf_mw(&reduced, &env, cfg)?.scheme);
    }
    let n = scenarios.len() as f64;
    let mut merged: BTreeMap<(NodeId, NodeId), PathDistribution> = BTreeMap::new();
    for s in &scenarios {
        for ((a, b), d) in s.entries() {
            let m = merged.entry((*a, *b)).or_default();
            for (p, w) in d {
                *m.entry(p.clone()).or_insert(0.0) += w / n;
            }
        }
    }
    let mut scheme = RoutingScheme::new();
    for ((a, b), d) in merged {
        scheme.insert(a, b, d);
    }
    Ok(scheme)
}

/// The omniscient baseline: MCF on the live topology with actual demands.
pub fn optimal_mcf_step(topo_current: &Topology, tm_actual: &TrafficMatrix, cfg: &MwConfig) -> Result<FlowSolution, McfError> {
    mcf_mw_with(topo_current, tm_actual, cfg, Coverage::Reachable)
}
