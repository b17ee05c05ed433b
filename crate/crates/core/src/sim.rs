//! Fluid simulation of schemes against traffic-matrix sequences.
//!
//! Every matrix is held for `steps_per_tm` steps. In each step the demand of
//! a pair is split over its paths in whole bits, and link bandwidth is shared
//! max-min fairly across the whole network by progressive filling. A flow is
//! limited by its tightest link; what it cannot push is congestion loss.
//! Traffic that reaches a failed link is dropped as failure loss, after
//! having used capacity upstream of the failure. Integer bit counts make
//! `delivered + congestion_loss + failure_loss == demand_total` exact.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::demands::{choose_sink, flash_burst_to, flash_decay, FlashConfig};
use crate::error::SimError;
use crate::mcf::{mcf_mw_with, optimal_mcf_step, semi_mcf, semi_mcf_env, semi_mcf_ft_env, MwConfig};
use crate::model::{
    churn, prune_to_budget, Adaptivity, AlgorithmKind, LinkId, NodeId, PathDistribution, PathSelector, RoutingScheme,
    Topology, TrafficMatrix,
};
use crate::raecke::{raecke_scheme, RaeckeConfig};
use crate::routing::{oblivious, spf_with, Coverage, KspConfig};

/// Max-min fair shares of one link. The sum of the result is
/// `min(capacity, Σ requests)`.
pub fn max_min_allocate(capacity: f64, requests: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by(|a, b| requests[*a].total_cmp(&requests[*b]).then(a.cmp(b)));
    let mut out = vec![0.0; requests.len()];
    let mut left = capacity.max(0.0);
    for (i, &f) in order.iter().enumerate() {
        let share = left / (order.len() - i) as f64;
        let r = requests[f].max(0.0);
        out[f] = r.min(share);
        left -= out[f];
    }
    out
}

/// Water level for integer requests on one link: the largest `w` with
/// `Σ min(r, w) ≤ capacity`, or `None` when every request fits.
fn water_level(capacity: u64, rems: &mut [u64]) -> Option<u64> {
    rems.sort_unstable();
    let mut left = capacity;
    for (i, &r) in rems.iter().enumerate() {
        let k = (rems.len() - i) as u64;
        if r.saturating_mul(k) <= left {
            left -= r;
        } else {
            return Some(left / k);
        }
    }
    None
}

struct Flow {
    /// Edges traversed before the first failed one.
    edges: Vec<usize>,
    demand: u64,
    failed: bool,
    latency: f64,
}

/// Network-wide max-min fair allocation by progressive filling.
fn allocate(flows: &[Flow], capacity: &[u64]) -> Vec<u64> {
    let mut alloc = vec![0u64; flows.len()];
    let mut residual = capacity.to_vec();
    let mut on_edge: Vec<Vec<usize>> = vec![Vec::new(); capacity.len()];
    let mut active = vec![false; flows.len()];
    for (i, f) in flows.iter().enumerate() {
        if f.edges.is_empty() {
            alloc[i] = f.demand;
        } else if f.demand > 0 {
            active[i] = true;
            for &e in &f.edges {
                on_edge[e].push(i);
            }
        }
    }
    let mut rems = Vec::new();
    loop {
        let mut best: Option<(u64, usize)> = None;
        let mut any = false;
        for (e, fl) in on_edge.iter().enumerate() {
            rems.clear();
            rems.extend(fl.iter().filter(|i| active[**i]).map(|i| flows[*i].demand - alloc[*i]));
            if rems.is_empty() {
                continue;
            }
            any = true;
            if let Some(w) = water_level(residual[e], &mut rems) {
                if best.is_none_or(|(b, _)| w < b) {
                    best = Some((w, e));
                }
            }
        }
        if !any {
            break;
        }
        let Some((w, bottleneck)) = best else {
            // everything left fits
            for i in 0..flows.len() {
                if active[i] {
                    let add = flows[i].demand - alloc[i];
                    alloc[i] += add;
                    for &e in &flows[i].edges {
                        residual[e] -= add;
                    }
                    active[i] = false;
                }
            }
            break;
        };
        for i in 0..flows.len() {
            if active[i] {
                let add = (flows[i].demand - alloc[i]).min(w);
                alloc[i] += add;
                for &e in &flows[i].edges {
                    residual[e] -= add;
                }
                if alloc[i] == flows[i].demand {
                    active[i] = false;
                }
            }
        }
        // hand out the bottleneck's rounding remainder one bit at a time
        for &i in &on_edge[bottleneck] {
            if residual[bottleneck] == 0 {
                break;
            }
            if active[i] && flows[i].edges.iter().all(|e| residual[*e] >= 1) {
                alloc[i] += 1;
                for &e in &flows[i].edges {
                    residual[e] -= 1;
                }
            }
        }
        for &i in &on_edge[bottleneck] {
            active[i] = false;
        }
    }
    alloc
}

/// Splits `total` bits in proportion to `weights` by largest remainder.
fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<u64> = exact.iter().map(|x| (x.floor() as u64).min(total)).collect();
    let assigned: u64 = out.iter().sum();
    let mut left = total.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|a, b| (exact[*b] - exact[*b].floor()).total_cmp(&(exact[*a] - exact[*a].floor())).then(a.cmp(b)));
    for i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[*i] += 1;
        left -= 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Recovery {
    None,
    Local,
    Global,
}

impl FromStr for Recovery {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Recovery::None),
            "local" => Ok(Recovery::Local),
            "global" => Ok(Recovery::Global),
            _ => Err(SimError::InvalidConfig(format!("recovery `{s}`; valid: none, local, global"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub steps_per_tm: usize,
    /// Simultaneous link failures per matrix.
    pub phi: usize,
    /// Paths kept per pair; `None` is unconstrained.
    pub budget: Option<usize>,
    pub recovery: Recovery,
    pub flash: Option<FlashConfig>,
    /// Matrix at whose first step the flash crowd starts.
    pub flash_start_tm: usize,
    /// Age in steps of the demand observation used by flash recovery.
    pub flash_lag: u64,
    pub flash_recovery_period: u64,
    pub seed: u64,
    /// Seconds per step; converts rates to bits.
    pub step_seconds: f64,
    /// Explicit failed links per matrix, replacing the `phi` schedule.
    pub failures: Option<Vec<BTreeSet<LinkId>>>,
    pub mw: MwConfig,
    pub raecke: RaeckeConfig,
    pub ksp: KspConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            steps_per_tm: 1000,
            phi: 0,
            budget: None,
            recovery: Recovery::None,
            flash: None,
            flash_start_tm: 0,
            flash_lag: 8,
            flash_recovery_period: 200,
            seed: 0,
            // five-minute matrices
            step_seconds: 0.3,
            failures: None,
            mw: MwConfig::default(),
            raecke: RaeckeConfig::default(),
            ksp: KspConfig::default(),
        }
    }
}

impl SimConfig {
    /// Default configuration with every seeded component keyed to `seed`.
    pub fn seeded(seed: u64) -> Self {
        let mut c = SimConfig { seed, ..SimConfig::default() };
        c.mw.seed = seed;
        c.raecke.seed = seed;
        c
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.steps_per_tm == 0 {
            return Err(SimError::InvalidConfig("steps_per_tm must be positive".into()));
        }
        if self.budget == Some(0) {
            return Err(SimError::InvalidConfig("budget must be positive".into()));
        }
        if !(self.step_seconds > 0.0 && self.step_seconds.is_finite()) {
            return Err(SimError::InvalidConfig(format!("step_seconds {}", self.step_seconds)));
        }
        if self.flash.is_some() && self.flash_recovery_period == 0 {
            return Err(SimError::InvalidConfig("flash_recovery_period must be positive".into()));
        }
        if let Some(f) = &self.flash {
            if !(f.beta >= 0.0) || f.half_life_steps == 0 {
                return Err(SimError::InvalidConfig(format!("{f:?}")));
            }
        }
        Ok(())
    }
}

/// Traffic-weighted latency histogram: latency bits to delivered bits.
pub type LatencyHistogram = BTreeMap<u64, u64>;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepMetrics {
    /// Carried load over capacity per directed edge, indexed by edge id.
    pub per_edge_congestion: Vec<f64>,
    pub delivered: u64,
    pub congestion_loss: u64,
    pub failure_loss: u64,
    /// Keys are `f64::to_bits` of non-negative latencies, so they sort.
    pub latency_samples: LatencyHistogram,
    pub demand_total: u64,
}

impl StepMetrics {
    pub fn conserved(&self) -> bool {
        self.delivered as u128 + self.congestion_loss as u128 + self.failure_loss as u128 == self.demand_total as u128
    }

    pub fn throughput(&self) -> f64 {
        if self.demand_total == 0 {
            1.0
        } else {
            self.delivered as f64 / self.demand_total as f64
        }
    }

    fn absorb(&mut self, other: &StepMetrics) {
        if self.per_edge_congestion.len() < other.per_edge_congestion.len() {
            self.per_edge_congestion.resize(other.per_edge_congestion.len(), 0.0);
        }
        for (a, b) in self.per_edge_congestion.iter_mut().zip(&other.per_edge_congestion) {
            *a = a.max(*b);
        }
        self.delivered += other.delivered;
        self.congestion_loss += other.congestion_loss;
        self.failure_loss += other.failure_loss;
        self.demand_total += other.demand_total;
        for (k, v) in &other.latency_samples {
            *self.latency_samples.entry(*k).or_insert(0) += v;
        }
    }

    pub fn max_congestion(&self) -> f64 {
        self.per_edge_congestion.iter().copied().fold(0.0, f64::max)
    }
}

/// Bit totals of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepTotals {
    pub delivered: u64,
    pub congestion_loss: u64,
    pub failure_loss: u64,
    pub demand_total: u64,
    pub max_congestion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TmRecord {
    pub tm: usize,
    pub failed_links: Vec<String>,
    /// Sums over the matrix's steps; edge congestion is the peak.
    pub metrics: StepMetrics,
    /// Largest pre-allocation utilization of a live edge over the steps.
    pub offered_congestion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trigger {
    Initial,
    Matrix,
    Flash,
}

/// One installation of a scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeEvent {
    pub tm: usize,
    pub step: usize,
    pub trigger: Trigger,
    /// Path-set change against the previous installation. For
    /// semi-oblivious kinds this is measured on the base path set.
    pub churn: usize,
    pub paths: usize,
    pub mean_paths_per_pair: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverTime {
    pub tm: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub algorithm: String,
    pub topology: String,
    pub steps_per_tm: usize,
    pub tms: Vec<TmRecord>,
    pub steps: Vec<StepTotals>,
    pub scheme_timeline: Vec<SchemeEvent>,
    pub solver_times: Vec<SolverTime>,
}

/// Zeroes demands between hosts whose switches cannot reach each other.
fn reachable_only(topo: &Topology, tm: &TrafficMatrix) -> TrafficMatrix {
    let mut out = tm.clone();
    let mut comp: HashMap<NodeId, BTreeSet<NodeId>> = HashMap::new();
    for ((s, t), _) in tm.positive() {
        let (a, b) = (topo.host_switch(s), topo.host_switch(t));
        let c = comp.entry(a).or_insert_with(|| topo.component_of(a));
        if !c.contains(&b) {
            out.set(s, t, 0.0);
        }
    }
    out
}

fn without_pairs(tm: &TrafficMatrix, base: &RoutingScheme) -> TrafficMatrix {
    let mut out = tm.clone();
    for ((s, t), _) in tm.positive() {
        if base.get(s, t).is_none_or(|d| d.is_empty()) {
            out.set(s, t, 0.0);
        }
    }
    out
}

/// Path set of the selector on `topo`. MCF-based selectors solve for `tm`.
pub fn base_paths(
    topo: &Topology,
    selector: PathSelector,
    tm: &TrafficMatrix,
    cfg: &SimConfig,
) -> Result<RoutingScheme, SimError> {
    if let Some(r) = oblivious(topo, selector, &cfg.ksp, Coverage::Reachable) {
        return Ok(r?);
    }
    match selector {
        PathSelector::Raecke => Ok(raecke_scheme(topo, &cfg.raecke)?),
        _ => Ok(mcf_mw_with(topo, tm, &cfg.mw, Coverage::Reachable)?.scheme),
    }
}

fn budgeted(scheme: RoutingScheme, budget: Option<usize>) -> RoutingScheme {
    match budget {
        Some(k) => prune_to_budget(&scheme, k),
        None => scheme,
    }
}

/// Fixed path set of a semi-oblivious kind, before any budget.
fn semi_base(
    kind: AlgorithmKind,
    topo: &Topology,
    predicted: &[TrafficMatrix],
    cfg: &SimConfig,
) -> Result<RoutingScheme, SimError> {
    let window: Vec<TrafficMatrix> = predicted.iter().map(|tm| reachable_only(topo, tm)).collect();
    match kind {
        AlgorithmKind::SemiMcf(sel) => base_paths(topo, sel, &window[0], cfg),
        AlgorithmKind::SemiMcfMcfEnv => Ok(semi_mcf_env(topo, &window, &cfg.mw)?),
        AlgorithmKind::SemiMcfMcfFtEnv => Ok(semi_mcf_ft_env(topo, &window, None, &cfg.mw)?),
        _ => unreachable!("not a semi-oblivious kind"),
    }
}

fn oblivious_scheme(kind: AlgorithmKind, topo: &Topology, cfg: &SimConfig) -> Result<RoutingScheme, SimError> {
    let sel = match kind {
        AlgorithmKind::Spf => PathSelector::Spf,
        AlgorithmKind::Ecmp => PathSelector::Ecmp,
        AlgorithmKind::Ksp => PathSelector::Ksp,
        AlgorithmKind::Vlb => PathSelector::Vlb,
        AlgorithmKind::Raecke => PathSelector::Raecke,
        _ => unreachable!("not an oblivious kind"),
    };
    base_paths(topo, sel, &TrafficMatrix::for_topology(topo), cfg)
}

/// Keeps surviving paths of every pair. Semi-oblivious kinds then re-solve
/// their weights over the survivors for `tm_lagged`; other kinds
/// renormalize. `scheme` is the installed path set, i.e. the base for
/// semi-oblivious kinds. Pairs that lose every path keep their old
/// distribution, so their traffic shows up as failure loss.
pub fn recover_local(
    scheme: &RoutingScheme,
    failed: &BTreeSet<LinkId>,
    kind: AlgorithmKind,
    topo: &Topology,
    tm_lagged: &TrafficMatrix,
    mw: &MwConfig,
) -> Result<RoutingScheme, SimError> {
    let mut surviving = RoutingScheme::new();
    let mut stranded = Vec::new();
    for ((s, t), dist) in scheme.entries() {
        let kept: PathDistribution =
            dist.iter().filter(|(p, _)| !p.links().any(|l| failed.contains(&l))).map(|(p, w)| (p.clone(), *w)).collect();
        if kept.is_empty() {
            stranded.push(((*s, *t), dist.clone()));
        } else if kept.len() == dist.len() {
            surviving.insert_raw(*s, *t, kept);
        } else {
            surviving.insert(*s, *t, kept);
        }
    }
    let mut out = if kind.is_semi_mcf() {
        let live = topo.with_failed(failed);
        let tm = without_pairs(tm_lagged, &surviving);
        semi_mcf(&live, &tm, &surviving, mw)?.scheme
    } else {
        surviving
    };
    for ((s, t), d) in stranded {
        out.insert_raw(s, t, d);
    }
    Ok(out)
}

/// Recomputes the algorithm from scratch on the reduced topology. Pairs that
/// the reduced topology disconnects are left out.
pub fn recover_global(
    kind: AlgorithmKind,
    topo_minus_failed: &Topology,
    predicted_tm: &TrafficMatrix,
    cfg: &SimConfig,
) -> Result<RoutingScheme, SimError> {
    let tm = reachable_only(topo_minus_failed, predicted_tm);
    let scheme = match kind.adaptivity() {
        Adaptivity::Oblivious => oblivious_scheme(kind, topo_minus_failed, cfg)?,
        Adaptivity::SemiOblivious => {
            let base = budgeted(semi_base(kind, topo_minus_failed, std::slice::from_ref(&tm), cfg)?, cfg.budget);
            semi_mcf(topo_minus_failed, &without_pairs(&tm, &base), &base, &cfg.mw)?.scheme
        }
        Adaptivity::Conscious => mcf_mw_with(topo_minus_failed, &tm, &cfg.mw, Coverage::Reachable)?.scheme,
    };
    Ok(budgeted(scheme, cfg.budget))
}

fn link_utilization_order(topo: &Topology, first: &TrafficMatrix) -> Result<Vec<LinkId>, SimError> {
    let scheme = spf_with(topo, Coverage::Reachable)?;
    let util = scheme.edge_utilization(topo, first);
    let mut links: Vec<(LinkId, f64, String)> = topo
        .core_links()
        .filter(|l| topo.is_enabled(*l))
        .map(|l| {
            let (a, b) = l.edges();
            (l, util[a.index()].max(util[b.index()]), topo.link_label(l))
        })
        .collect();
    links.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.2.cmp(&y.2)));
    Ok(links.into_iter().map(|x| x.0).collect())
}

/// Failed links for each matrix. With one failure the core links are sorted
/// by SPF utilization under `first` (descending, ties by name) and matrix `t`
/// fails position `⌊t·L/T⌋`. With more, random subsets are redrawn until the
/// switches stay connected.
pub fn failure_schedule(
    topo: &Topology,
    phi: usize,
    num_tms: usize,
    first: &TrafficMatrix,
    seed: u64,
) -> Result<Vec<BTreeSet<LinkId>>, SimError> {
    const DRAWS: usize = 1000;
    match phi {
        0 => Ok(vec![BTreeSet::new(); num_tms]),
        1 => {
            let order = link_utilization_order(topo, first)?;
            if order.is_empty() {
                return Err(SimError::Infeasible { phi });
            }
            Ok((0..num_tms).map(|t| [order[t * order.len() / num_tms]].into()).collect())
        }
        _ => {
            let links: Vec<LinkId> = topo.core_links().filter(|l| topo.is_enabled(*l)).collect();
            if phi > links.len() {
                return Err(SimError::Infeasible { phi });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(num_tms);
            for _ in 0..num_tms {
                let pick = (0..DRAWS).find_map(|_| {
                    let set: BTreeSet<LinkId> = sample(&mut rng, links.len(), phi).into_iter().map(|i| links[i]).collect();
                    topo.connected_without(&set).then_some(set)
                });
                out.push(pick.ok_or(SimError::Infeasible { phi })?);
            }
            Ok(out)
        }
    }
}

struct Installed {
    scheme: RoutingScheme,
    /// What churn is measured on.
    paths: RoutingScheme,
}

struct Engine<'a> {
    topo: &'a Topology,
    kind: AlgorithmKind,
    cfg: &'a SimConfig,
    fallback: RoutingScheme,
    /// Budgeted fixed scheme (oblivious) or base (semi-oblivious).
    fixed: Option<RoutingScheme>,
    global_cache: HashMap<BTreeSet<LinkId>, RoutingScheme>,
    solver_times: Vec<SolverTime>,
}

impl Engine<'_> {
    fn timed<T>(&mut self, tm: usize, f: impl FnOnce(&mut Self) -> Result<T, SimError>) -> Result<T, SimError> {
        let start = Instant::now();
        let r = f(self)?;
        self.solver_times.push(SolverTime { tm, seconds: start.elapsed().as_secs_f64() });
        Ok(r)
    }

    /// Routes pairs the scheme lost along their intact shortest path, so
    /// their traffic is accounted as failure loss.
    fn patch(&self, mut scheme: RoutingScheme) -> RoutingScheme {
        for ((s, t), d) in self.fallback.entries() {
            if scheme.get(*s, *t).is_none_or(|x| x.is_empty()) {
                scheme.insert_raw(*s, *t, d.clone());
            }
        }
        scheme
    }

    fn install(
        &mut self,
        t: usize,
        failed: &BTreeSet<LinkId>,
        predicted: &TrafficMatrix,
        actual: &TrafficMatrix,
    ) -> Result<Installed, SimError> {
        let cfg = self.cfg;
        let topo = self.topo;
        let kind = self.kind;
        if kind == AlgorithmKind::OptimalMcf {
            let live = topo.with_failed(failed);
            let tm = reachable_only(&live, actual);
            let s = self.timed(t, |_| Ok(budgeted(optimal_mcf_step(&live, &tm, &cfg.mw)?.scheme, cfg.budget)))?;
            let s = self.patch(s);
            return Ok(Installed { paths: s.clone(), scheme: s });
        }
        if !failed.is_empty() && cfg.recovery == Recovery::Global {
            let s = match (kind.adaptivity(), self.global_cache.get(failed)) {
                (Adaptivity::Oblivious, Some(s)) => s.clone(),
                _ => {
                    let live = topo.with_failed(failed);
                    let s = self.timed(t, |_| recover_global(kind, &live, predicted, cfg))?;
                    if kind.adaptivity() == Adaptivity::Oblivious {
                        self.global_cache.insert(failed.clone(), s.clone());
                    }
                    s
                }
            };
            let s = self.patch(s);
            return Ok(Installed { paths: s.clone(), scheme: s });
        }
        let local = !failed.is_empty() && cfg.recovery == Recovery::Local;
        match kind.adaptivity() {
            Adaptivity::Oblivious => {
                let fixed = self.fixed.clone().expect("fixed scheme");
                let s = if local {
                    self.timed(t, |_| recover_local(&fixed, failed, kind, topo, predicted, &cfg.mw))?
                } else {
                    fixed
                };
                Ok(Installed { paths: s.clone(), scheme: s })
            }
            Adaptivity::SemiOblivious => {
                let base = self.fixed.clone().expect("base");
                let (scheme, paths) = if local {
                    let s = self.timed(t, |_| recover_local(&base, failed, kind, topo, predicted, &cfg.mw))?;
                    (s, recover_local(&base, failed, AlgorithmKind::Spf, topo, predicted, &cfg.mw)?)
                } else {
                    let tm = without_pairs(predicted, &base);
                    (self.timed(t, |_| Ok(semi_mcf(topo, &tm, &base, &cfg.mw)?.scheme))?, base)
                };
                Ok(Installed { scheme: self.patch(scheme), paths })
            }
            Adaptivity::Conscious => {
                let tm = reachable_only(topo, predicted);
                let s = self.timed(t, |_| Ok(budgeted(mcf_mw_with(topo, &tm, &cfg.mw, Coverage::Reachable)?.scheme, cfg.budget)))?;
                let s = if local { recover_local(&s, failed, kind, topo, predicted, &cfg.mw)? } else { s };
                let s = self.patch(s);
                Ok(Installed { paths: s.clone(), scheme: s })
            }
        }
    }

    /// Flash-crowd reaction with the demand observed `flash_lag` steps ago.
    fn react(
        &mut self,
        t: usize,
        failed: &BTreeSet<LinkId>,
        current: &Installed,
        observed: &TrafficMatrix,
    ) -> Result<Installed, SimError> {
        let cfg = self.cfg;
        let (topo, kind) = (self.topo, self.kind);
        match kind.adaptivity() {
            _ if kind == AlgorithmKind::OptimalMcf => {
                let live = topo.with_failed(failed);
                let tm = reachable_only(&live, observed);
                let s = self.timed(t, |_| Ok(budgeted(optimal_mcf_step(&live, &tm, &cfg.mw)?.scheme, cfg.budget)))?;
                let s = self.patch(s);
                Ok(Installed { paths: s.clone(), scheme: s })
            }
            Adaptivity::SemiOblivious => {
                let s = self.timed(t, |_| recover_local(&current.paths, failed, kind, topo, observed, &cfg.mw))?;
                Ok(Installed { scheme: self.patch(s), paths: current.paths.clone() })
            }
            _ => Ok(Installed { scheme: current.scheme.clone(), paths: current.paths.clone() }),
        }
    }
}

struct Routes {
    /// Per pair: host indices, and per path its probability and flow shape.
    pairs: Vec<(usize, usize, Vec<(f64, Flow)>)>,
    live: Vec<bool>,
}

fn compile(topo: &Topology, scheme: &RoutingScheme, failed: &BTreeSet<LinkId>, hosts: &[NodeId]) -> Routes {
    let index: HashMap<NodeId, usize> = hosts.iter().enumerate().map(|(i, h)| (*h, i)).collect();
    let pairs = scheme
        .entries()
        .map(|((s, t), dist)| {
            let paths = dist
                .iter()
                .map(|(p, w)| {
                    let cut = p.edges().iter().position(|e| failed.contains(&e.link()));
                    let upto = cut.unwrap_or(p.edges().len());
                    let flow = Flow {
                        edges: p.edges()[..upto].iter().map(|e| e.index()).collect(),
                        demand: 0,
                        failed: cut.is_some(),
                        latency: p.latency(topo),
                    };
                    (*w, flow)
                })
                .collect();
            (index[s], index[t], paths)
        })
        .collect();
    let live = (0..topo.edge_count()).map(|e| !failed.contains(&crate::model::EdgeId(e as u32).link())).collect();
    Routes { pairs, live }
}

fn run_step(topo: &Topology, routes: &Routes, demand: &TrafficMatrix, dt: f64) -> (StepMetrics, f64) {
    let capacity: Vec<u64> = topo.edges().iter().map(|e| (e.capacity * dt).floor() as u64).collect();
    let mut flows = Vec::new();
    let mut m = StepMetrics { per_edge_congestion: vec![0.0; topo.edge_count()], ..Default::default() };
    let mut covered = vec![false; demand.host_count() * demand.host_count()];
    for (i, j, paths) in &routes.pairs {
        let rate = demand.get_index(*i, *j);
        covered[i * demand.host_count() + j] = true;
        if rate <= 0.0 {
            continue;
        }
        let bits = (rate * dt).round() as u64;
        m.demand_total += bits;
        let weights: Vec<f64> = paths.iter().map(|(w, _)| *w).collect();
        for ((_, f), b) in paths.iter().zip(apportion(bits, &weights)) {
            flows.push(Flow { edges: f.edges.clone(), demand: b, failed: f.failed, latency: f.latency });
        }
    }
    // demand the scheme does not route at all is lost to failure
    for ((s, t), rate) in demand.entries() {
        let (i, j) = (demand.hosts().iter().position(|h| *h == s).unwrap(), demand.hosts().iter().position(|h| *h == t).unwrap());
        if rate > 0.0 && !covered[i * demand.host_count() + j] {
            let bits = (rate * dt).round() as u64;
            m.demand_total += bits;
            m.failure_loss += bits;
        }
    }
    let mut offered = vec![0u64; topo.edge_count()];
    for f in &flows {
        for &e in &f.edges {
            offered[e] += f.demand;
        }
    }
    let alloc = allocate(&flows, &capacity);
    let mut carried = vec![0u64; topo.edge_count()];
    for (f, a) in flows.iter().zip(&alloc) {
        for &e in &f.edges {
            carried[e] += a;
        }
        m.congestion_loss += f.demand - a;
        if f.failed {
            m.failure_loss += a;
        } else {
            m.delivered += a;
            if *a > 0 {
                *m.latency_samples.entry(f.latency.max(0.0).to_bits()).or_insert(0) += a;
            }
        }
    }
    let mut offered_max: f64 = 0.0;
    for (e, edge) in topo.edges().iter().enumerate() {
        let denom = edge.capacity * dt;
        m.per_edge_congestion[e] = carried[e] as f64 / denom;
        if routes.live[e] {
            offered_max = offered_max.max(offered[e] as f64 / denom);
        }
    }
    (m, offered_max)
}

/// Replays `actual` against the schemes the algorithm derives from
/// `predicted`, one matrix per `cfg.steps_per_tm` steps.
pub fn simulate(
    topo: &Topology,
    kind: AlgorithmKind,
    actual: &[TrafficMatrix],
    predicted: &[TrafficMatrix],
    cfg: &SimConfig,
) -> Result<SimReport, SimError> {
    cfg.validate()?;
    if actual.len() != predicted.len() {
        return Err(SimError::LengthMismatch(actual.len(), predicted.len()));
    }
    let n = actual.len();
    let schedule = match &cfg.failures {
        Some(f) if f.len() != n => return Err(SimError::LengthMismatch(n, f.len())),
        Some(f) => f.clone(),
        None if n == 0 => Vec::new(),
        None => failure_schedule(topo, cfg.phi, n, &actual[0], cfg.seed)?,
    };
    let mut engine = Engine {
        topo,
        kind,
        cfg,
        fallback: spf_with(topo, Coverage::Reachable)?,
        fixed: None,
        global_cache: HashMap::new(),
        solver_times: Vec::new(),
    };
    match kind.adaptivity() {
        Adaptivity::Oblivious => {
            let s = engine.timed(0, |e| Ok(budgeted(oblivious_scheme(kind, topo, e.cfg)?, cfg.budget)))?;
            engine.fixed = Some(s);
        }
        Adaptivity::SemiOblivious if n > 0 => {
            let s = engine.timed(0, |e| Ok(budgeted(semi_base(kind, topo, predicted, e.cfg)?, cfg.budget)))?;
            engine.fixed = Some(s);
        }
        _ => {}
    }

    let flash = match cfg.flash {
        Some(f) if f.beta > 0.0 && cfg.flash_start_tm < n => {
            Some((f, choose_sink(&actual[cfg.flash_start_tm], f.sink_seed)?, cfg.flash_start_tm * cfg.steps_per_tm))
        }
        _ => None,
    };
    let demand_at = |g: usize| -> TrafficMatrix {
        let tm = &actual[g / cfg.steps_per_tm];
        match flash {
            Some((f, sink, start)) if g >= start => {
                flash_burst_to(tm, sink, f.beta, flash_decay(f.half_life_steps, (g - start) as u64))
            }
            _ => tm.clone(),
        }
    };

    let mut report = SimReport {
        algorithm: kind.name(),
        topology: topo.name().to_string(),
        steps_per_tm: cfg.steps_per_tm,
        tms: Vec::with_capacity(n),
        steps: Vec::with_capacity(n * cfg.steps_per_tm),
        scheme_timeline: Vec::new(),
        solver_times: Vec::new(),
    };
    let mut previous: Option<RoutingScheme> = None;
    let event = |report: &mut SimReport, t: usize, step: usize, inst: &Installed, prev: &mut Option<RoutingScheme>| {
        let trigger = match (&prev, step) {
            (None, _) => Trigger::Initial,
            (_, 0) => Trigger::Matrix,
            _ => Trigger::Flash,
        };
        report.scheme_timeline.push(SchemeEvent {
            tm: t,
            step,
            trigger,
            churn: prev.as_ref().map_or(0, |p| churn(p, &inst.paths)),
            paths: inst.paths.path_count(),
            mean_paths_per_pair: inst.paths.mean_paths_per_pair(),
        });
        *prev = Some(inst.paths.clone());
    };

    for t in 0..n {
        let failed = &schedule[t];
        let mut inst = engine.install(t, failed, &predicted[t], &actual[t])?;
        event(&mut report, t, 0, &inst, &mut previous);
        let mut routes = compile(topo, &inst.scheme, failed, actual[t].hosts());
        let mut record = TmRecord {
            tm: t,
            failed_links: failed.iter().map(|l| topo.link_label(*l)).collect(),
            metrics: StepMetrics { per_edge_congestion: vec![0.0; topo.edge_count()], ..Default::default() },
            offered_congestion: 0.0,
        };
        let mut memo: Option<(StepMetrics, f64)> = None;
        for k in 0..cfg.steps_per_tm {
            let g = t * cfg.steps_per_tm + k;
            let in_flash = flash.is_some_and(|(_, _, start)| g >= start);
            if let Some((_, _, start)) = flash {
                let age = g.saturating_sub(start) as u64;
                if g > start && age % cfg.flash_recovery_period == 0 {
                    let observed = demand_at(g.saturating_sub(cfg.flash_lag as usize));
                    inst = engine.react(t, failed, &inst, &observed)?;
                    event(&mut report, t, k, &inst, &mut previous);
                    routes = compile(topo, &inst.scheme, failed, actual[t].hosts());
                    memo = None;
                }
            }
            let (m, offered) = match (&memo, in_flash) {
                (Some(hit), false) => hit.clone(),
                _ => {
                    let r = run_step(topo, &routes, &demand_at(g), cfg.step_seconds);
                    memo = Some(r.clone());
                    r
                }
            };
            report.steps.push(StepTotals {
                delivered: m.delivered,
                congestion_loss: m.congestion_loss,
                failure_loss: m.failure_loss,
                demand_total: m.demand_total,
                max_congestion: m.max_congestion(),
            });
            record.offered_congestion = record.offered_congestion.max(offered);
            record.metrics.absorb(&m);
        }
        report.tms.push(record);
    }
    report.solver_times = engine.solver_times;
    Ok(report)
}

/// Per-algorithm aggregate of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub algorithm: String,
    pub topology: String,
    pub tms: usize,
    pub mean_congestion: f64,
    pub max_congestion: f64,
    pub mean_offered_congestion: f64,
    pub max_offered_congestion: f64,
    pub throughput: f64,
    pub congestion_loss_fraction: f64,
    pub failure_loss_fraction: f64,
    /// `(percentile, latency)` of delivered bits.
    pub latency_percentiles: Vec<(f64, f64)>,
    pub total_churn: usize,
    pub mean_paths_per_pair: f64,
    pub max_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver_time_total: Option<f64>,
}

pub const LATENCY_PERCENTILES: [f64; 12] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0];

/// Smallest latency below which at least fraction `p` of the bits travel.
pub fn latency_percentile(hist: &LatencyHistogram, p: f64) -> f64 {
    let total: u64 = hist.values().sum();
    if total == 0 {
        return 0.0;
    }
    let need = (p * total as f64).ceil().max(1.0);
    let mut acc = 0u64;
    for (k, v) in hist {
        acc += v;
        if acc as f64 >= need {
            return f64::from_bits(*k);
        }
    }
    f64::from_bits(*hist.keys().next_back().unwrap())
}

fn fraction(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics_rollup(report: &SimReport) -> Summary {
    let mut total = StepMetrics::default();
    for r in &report.tms {
        total.absorb(&r.metrics);
    }
    let n = report.tms.len().max(1) as f64;
    let congestion: Vec<f64> = report.tms.iter().map(|r| r.metrics.max_congestion()).collect();
    let offered: Vec<f64> = report.tms.iter().map(|r| r.offered_congestion).collect();
    let max_paths = report.scheme_timeline.iter().map(|e| e.paths).max().unwrap_or(0);
    let mean_paths = if report.scheme_timeline.is_empty() {
        0.0
    } else {
        report.scheme_timeline.iter().map(|e| e.mean_paths_per_pair).sum::<f64>() / report.scheme_timeline.len() as f64
    };
    Summary {
        algorithm: report.algorithm.clone(),
        topology: report.topology.clone(),
        tms: report.tms.len(),
        mean_congestion: congestion.iter().sum::<f64>() / n,
        max_congestion: congestion.iter().copied().fold(0.0, f64::max),
        mean_offered_congestion: offered.iter().sum::<f64>() / n,
        max_offered_congestion: offered.iter().copied().fold(0.0, f64::max),
        throughput: fraction(total.delivered, total.demand_total, 1.0),
        congestion_loss_fraction: fraction(total.congestion_loss, total.demand_total, 0.0),
        failure_loss_fraction: fraction(total.failure_loss, total.demand_total, 0.0),
        latency_percentiles: LATENCY_PERCENTILES.iter().map(|p| (*p, latency_percentile(&total.latency_samples, *p))).collect(),
        total_churn: report.scheme_timeline.iter().map(|e| e.churn).sum(),
        mean_paths_per_pair: mean_paths,
        max_paths,
        solver_time_total: Some(report.solver_times.iter().map(|s| s.seconds).sum()),
    }
}

impl Summary {
    pub fn without_timings(mut self) -> Self {
        self.solver_time_total = None;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

impl SimReport {
    /// One row per matrix per metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tm,metric,value\n");
        for r in &self.tms {
            let m = &r.metrics;
            let rows: [(&str, String); 9] = [
                ("demand_total", m.demand_total.to_string()),
                ("delivered", m.delivered.to_string()),
                ("congestion_loss", m.congestion_loss.to_string()),
                ("failure_loss", m.failure_loss.to_string()),
                ("throughput", m.throughput().to_string()),
                ("max_congestion", m.max_congestion().to_string()),
                ("offered_congestion", r.offered_congestion.to_string()),
                ("churn", self.scheme_timeline.iter().filter(|e| e.tm == r.tm).map(|e| e.churn).sum::<usize>().to_string()),
                ("failed_links", r.failed_links.join(" ")),
            ];
            for (k, v) in rows {
                let _ = writeln!(out, "{},{},{}", r.tm, k, v);
            }
        }
        out
    }

    /// One row per simulated step.
    pub fn steps_csv(&self) -> String {
        let mut out = String::from("step,demand_total,delivered,congestion_loss,failure_loss,max_congestion\n");
        for (i, s) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{}",
                s.demand_total, s.delivered, s.congestion_loss, s.failure_loss, s.max_congestion
            );
        }
        out
    }

    /// Throughput fraction of each matrix.
    pub fn throughput_per_tm(&self) -> Vec<f64> {
        self.tms.iter().map(|r| r.metrics.throughput()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TopologyBuilder;

    #[test]
    fn water_filling_examples() {
        assert_eq!(max_min_allocate(10.0, &[8.0, 4.0]), vec![6.0, 4.0]);
        assert_eq!(max_min_allocate(10.0, &[3.0, 3.0]), vec![3.0, 3.0]);
        assert_eq!(water_level(10, &mut [8, 4]), Some(6));
        assert_eq!(water_level(10, &mut [3, 3]), None);
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(10, &[0.5, 0.5]), vec![5, 5]);
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]).iter().sum::<u64>(), 10);
        assert_eq!(apportion(7, &[0.0, 1.0]), vec![0, 7]);
    }

    #[test]
    fn shared_bottleneck() {
        // two flows share edge 0 (cap 10); the second also crosses edge 1 (cap 3)
        let flows = vec![
            Flow { edges: vec![0], demand: 9, failed: false, latency: 0.0 },
            Flow { edges: vec![0, 1], demand: 9, failed: false, latency: 0.0 },
        ];
        assert_eq!(allocate(&flows, &[10, 3]), vec![7, 3]);
    }

    fn line() -> Topology {
        TopologyBuilder::new("line")
            .switch("a")
            .switch("b")
            .link("a", "b", 10.0, 1.0)
            .hosts_on_every_switch(100.0)
            .build()
            .unwrap()
    }

    #[test]
    fn single_path_lossless() {
        let t = line();
        let mut tm = TrafficMatrix::for_topology(&t);
        tm.set(t.node_id("h-a").unwrap(), t.node_id("h-b").unwrap(), 5.0);
        let cfg = SimConfig { steps_per_tm: 10, step_seconds: 1.0, ..SimConfig::default() };
        let r = simulate(&t, AlgorithmKind::Spf, &[tm.clone()], &[tm], &cfg).unwrap();
        for s in &r.steps {
            assert_eq!((s.delivered, s.demand_total, s.congestion_loss, s.failure_loss), (5, 5, 0, 0));
        }
        assert_eq!(metrics_rollup(&r).throughput, 1.0);
    }

    #[test]
    fn zero_demand() {
        let t = line();
        let tm = TrafficMatrix::for_topology(&t);
        let r = simulate(&t, AlgorithmKind::Ecmp, &[tm.clone()], &[tm], &SimConfig { steps_per_tm: 3, ..SimConfig::default() })
            .unwrap();
        let s = metrics_rollup(&r);
        assert_eq!(s.throughput, 1.0);
        assert_eq!(r.tms[0].metrics.demand_total, 0);
        assert_eq!(s.max_congestion, 0.0);
    }

    #[test]
    fn overload_is_congestion_loss() {
        let t = line();
        let mut tm = TrafficMatrix::for_topology(&t);
        tm.set(t.node_id("h-a").unwrap(), t.node_id("h-b").unwrap(), 25.0);
        let cfg = SimConfig { steps_per_tm: 2, step_seconds: 1.0, ..SimConfig::default() };
        let r = simulate(&t, AlgorithmKind::Spf, &[tm.clone()], &[tm], &cfg).unwrap();
        let m = &r.tms[0].metrics;
        assert_eq!((m.delivered, m.congestion_loss, m.demand_total), (20, 30, 50));
        assert!((m.max_congestion() - 1.0).abs() < 1e-12);
        assert!((r.tms[0].offered_congestion - 2.5).abs() < 1e-12);
    }

    #[test]
    fn recovery_parses() {
        assert_eq!("Local".parse::<Recovery>().unwrap(), Recovery::Local);
        assert!("sideways".parse::<Recovery>().is_err());
    }
}
