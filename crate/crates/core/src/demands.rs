//! Synthetic demand generation.
//!
//! Host weights follow a Pareto law and evolve by Metropolis-Hastings steps;
//! each traffic matrix is a gravity model over the current weights, rescaled
//! by a weekly diurnal template. Predicted sequences perturb the weights.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::DemandError;
use crate::mcf::{mcf_mw, MwConfig};
use crate::model::{NodeId, Topology, TrafficMatrix};

/// Steps per day with five-minute matrices.
pub const STEPS_PER_DAY: f64 = 288.0;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GravityState {
    pub hosts: Vec<NodeId>,
    pub weights: Vec<f64>,
    pub pareto_shape: f64,
    pub pareto_scale: f64,
    pub seed: u64,
    /// Number of Metropolis-Hastings steps taken so far.
    pub step: u64,
}

impl GravityState {
    /// Weights drawn from Pareto(shape 1.5, scale 1).
    pub fn new(topo: &Topology, seed: u64) -> Self {
        Self::with_pareto(topo.hosts(), 1.5, 1.0, seed)
    }

    pub fn with_pareto(hosts: &[NodeId], shape: f64, scale: f64, seed: u64) -> Self {
        assert!(shape > 1.0 && scale > 0.0, "Pareto shape must exceed 1 and scale be positive");
        let mut rng = rng_for(seed, u64::MAX);
        let dist = Pareto::new(scale, shape).unwrap();
        let weights = hosts.iter().map(|_| dist.sample(&mut rng)).collect();
        GravityState { hosts: hosts.to_vec(), weights, pareto_shape: shape, pareto_scale: scale, seed, step: 0 }
    }

    /// Starts from a given weight list, e.g. one fitted to measurements.
    pub fn from_weights(hosts: &[NodeId], weights: Vec<f64>, seed: u64) -> Result<Self, DemandError> {
        if hosts.len() != weights.len() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(DemandError::InvalidParameter("weights must be positive, one per host".into()));
        }
        Ok(GravityState { hosts: hosts.to_vec(), weights, pareto_shape: 1.5, pareto_scale: 1.0, seed, step: 0 })
    }
}

/// `d(i,j) = total·w_i·w_j / Σ_{a≠b} w_a·w_b`.
pub fn gravity_tm(state: &GravityState, total: f64) -> Result<TrafficMatrix, DemandError> {
    let n = state.hosts.len();
    if n < 2 {
        return Err(DemandError::TooFewHosts);
    }
    if !(total.is_finite() && total >= 0.0) {
        return Err(DemandError::InvalidParameter(format!("total {total}")));
    }
    let w = &state.weights;
    let sum: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|x| x * x).sum();
    let norm = sum * sum - sq;
    let mut tm = TrafficMatrix::zeros(&state.hosts);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                tm.set_index(i, j, total * w[i] * w[j] / norm);
            }
        }
    }
    Ok(tm)
}

fn normal_pdf(x: f64, sd: f64) -> f64 {
    (-0.5 * (x / sd).powi(2)).exp() / (sd * (2.0 * PI).sqrt())
}

/// Proposal density of moving from `w` to `to`.
fn proposal_density(w: f64, to: f64) -> f64 {
    let d = (to - w).abs();
    let jump = if d >= 0.8 * w && d <= w { 1.0 / (0.4 * w) } else { 0.0 };
    0.99 * normal_pdf(to - w, w / 2.0) + 0.01 * jump
}

/// One Metropolis-Hastings step per weight, with a Pareto stationary law.
///
/// Proposals add `N(0, w²/4)` with probability 0.99 and a uniform jump of
/// magnitude in `[0.8w, w]` otherwise. Since the proposal depends on `w`,
/// acceptance uses the full Hastings ratio of the mixture.
pub fn mh_step(state: &GravityState) -> GravityState {
    let mut rng = rng_for(state.seed, state.step);
    let a = state.pareto_shape;
    let density = |w: f64| if w >= state.pareto_scale { w.powf(-(a + 1.0)) } else { 0.0 };
    let mut next = state.clone();
    next.step += 1;
    for w in next.weights.iter_mut() {
        let cur = *w;
        let delta = if rng.random::<f64>() < 0.99 {
            let z: f64 = rng.sample(StandardNormal);
            z * cur / 2.0
        } else {
            let mag = rng.random_range(0.8 * cur..=cur);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        };
        let u: f64 = rng.random();
        let prop = cur + delta;
        if prop <= 0.0 {
            continue;
        }
        let target = density(prop);
        if target == 0.0 {
            continue;
        }
        let ratio = target * proposal_density(prop, cur) / (density(cur) * proposal_density(cur, prop));
        if u < ratio {
            *w = prop;
        }
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiurnalConfig {
    /// Standard deviation of the relative perturbation of each coefficient.
    pub noise: f64,
    pub steps_per_day: f64,
}

impl Default for DiurnalConfig {
    fn default() -> Self {
        DiurnalConfig { noise: 0.05, steps_per_day: STEPS_PER_DAY }
    }
}

/// (period in days, amplitude, phase) of the template's harmonics.
const HARMONICS: [(f64, f64, f64); 3] = [(1.0, 0.3, -PI / 2.0), (0.5, 0.1, 0.0), (7.0, 0.15, PI / 3.0)];

/// Weekly template value at `step`, coefficients perturbed by the seed.
pub fn diurnal_factor(step: u64, seed: u64, cfg: &DiurnalConfig) -> f64 {
    let mut rng = rng_for(seed, u64::MAX - 1);
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).unwrap();
    let mut f = 1.0;
    for (days, amp, phase) in HARMONICS {
        let a = amp * (1.0 + noise.sample(&mut rng)).clamp(0.5, 1.5);
        let period = days * cfg.steps_per_day;
        f += a * (2.0 * PI * step as f64 / period + phase).sin();
    }
    f
}

pub fn diurnal_scale(step: u64, base_total: f64, seed: u64) -> f64 {
    base_total * diurnal_factor(step, seed, &DiurnalConfig::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlashConfig {
    pub beta: f64,
    pub half_life_steps: u32,
    pub sink_seed: u64,
}

impl Default for FlashConfig {
    fn default() -> Self {
        FlashConfig { beta: 0.0, half_life_steps: 30, sink_seed: 0 }
    }
}

/// Hyperbolic decay with `decay(half_life) = 1/2`.
pub fn flash_decay(half_life: u32, elapsed: u64) -> f64 {
    let h = half_life as f64;
    h / (h + elapsed as f64)
}

/// Seeded choice among hosts that receive traffic.
pub fn choose_sink(tm: &TrafficMatrix, sink_seed: u64) -> Result<NodeId, DemandError> {
    let eligible: Vec<NodeId> = tm.hosts().iter().copied().filter(|h| tm.column_total(*h) > 0.0).collect();
    if eligible.is_empty() {
        return Err(DemandError::NoEligibleSink);
    }
    let mut rng = rng_for(sink_seed, 0);
    Ok(eligible[rng.random_range(0..eligible.len())])
}

/// Adds a flash crowd towards `sink`:
/// `decay·β·(Σd/n)·d(h,s)/Σ_i d(i,s)` on every entry `(h, sink)`.
pub fn flash_burst_to(tm: &TrafficMatrix, sink: NodeId, beta: f64, decay: f64) -> TrafficMatrix {
    let col = tm.column_total(sink);
    let mut out = tm.clone();
    if beta == 0.0 || col <= 0.0 {
        return out;
    }
    let peak = beta * tm.total() / tm.host_count() as f64;
    for &h in tm.hosts() {
        if h != sink {
            let d = tm.get(h, sink);
            out.set(h, sink, d + decay * peak * d / col);
        }
    }
    out
}

pub fn flash_burst(tm: &TrafficMatrix, cfg: &FlashConfig, elapsed: u64) -> Result<TrafficMatrix, DemandError> {
    if !(cfg.beta >= 0.0) || cfg.half_life_steps == 0 {
        return Err(DemandError::InvalidParameter(format!("{cfg:?}")));
    }
    if cfg.beta == 0.0 {
        return Ok(tm.clone());
    }
    let sink = choose_sink(tm, cfg.sink_seed)?;
    Ok(flash_burst_to(tm, sink, cfg.beta, flash_decay(cfg.half_life_steps, elapsed)))
}

/// Scalar that brings the first matrix's optimal congestion to `0.4·S`.
pub fn scale_factor(topo: &Topology, first: &TrafficMatrix, s: f64, cfg: &MwConfig) -> Result<f64, DemandError> {
    if first.is_zero() {
        return Err(DemandError::ZeroDemand);
    }
    if !(s.is_finite() && s > 0.0) {
        return Err(DemandError::InvalidParameter(format!("scale {s}")));
    }
    let opt = mcf_mw(topo, first, cfg)?.max_congestion;
    Ok(0.4 * s / opt)
}

/// Multiplies every matrix by one scalar so that the optimal congestion of the
/// first is `0.4·S`.
pub fn normalize_scale(
    topo: &Topology,
    tms: &[TrafficMatrix],
    s: f64,
    cfg: &MwConfig,
) -> Result<Vec<TrafficMatrix>, DemandError> {
    let first = tms.first().ok_or(DemandError::ZeroDemand)?;
    let lambda = scale_factor(topo, first, s, cfg)?;
    Ok(tms.iter().map(|tm| tm.scaled(lambda)).collect())
}

/// Multiplies each weight by `1+ε` or `1−ε` on a fair coin.
pub fn perturb_for_prediction(state: &GravityState, epsilon: f64, seed: u64) -> GravityState {
    assert!((0.0..1.0).contains(&epsilon), "epsilon must lie in [0, 1)");
    let mut out = state.clone();
    if epsilon == 0.0 {
        return out;
    }
    let mut rng = rng_for(seed, u64::MAX - 2);
    for w in out.weights.iter_mut() {
        *w *= if rng.random::<bool>() { 1.0 + epsilon } else { 1.0 - epsilon };
    }
    out
}

/// Matrix form of [`perturb_for_prediction`]: scales entry `(i, j)` by
/// `f_i·f_j` with the same coin flips, then restores the total. On a gravity
/// matrix this equals the gravity matrix of the perturbed weights.
pub fn perturb_tm(tm: &TrafficMatrix, epsilon: f64, seed: u64) -> TrafficMatrix {
    assert!((0.0..1.0).contains(&epsilon), "epsilon must lie in [0, 1)");
    if epsilon == 0.0 {
        return tm.clone();
    }
    let mut rng = rng_for(seed, u64::MAX - 2);
    let f: Vec<f64> =
        (0..tm.host_count()).map(|_| if rng.random::<bool>() { 1.0 + epsilon } else { 1.0 - epsilon }).collect();
    let n = tm.host_count();
    let mut out = tm.clone();
    for i in 0..n {
        for j in 0..n {
            out.set_index(i, j, tm.get_index(i, j) * f[i] * f[j]);
        }
    }
    let total = out.total();
    if total > 0.0 {
        out.scaled(tm.total() / total)
    } else {
        out
    }
}

/// Seed of the perturbation applied to matrix `t` of a predicted sequence.
pub fn prediction_seed(seed: u64, t: usize) -> u64 {
    seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandConfig {
    pub num_tms: usize,
    /// Target first-matrix optimal congestion, divided by 0.4.
    pub scale: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub pareto_shape: f64,
    pub pareto_scale: f64,
    /// Pre-normalization total of the diurnal template's mean.
    pub base_total: f64,
    pub diurnal: DiurnalConfig,
    /// Template step of the first matrix.
    pub start_step: u64,
    pub accuracy: f64,
    /// Flash crowd added to the actual sequence from its first matrix on.
    #[serde(default)]
    pub flash: Option<FlashConfig>,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig {
            num_tms: 24,
            scale: 1.0,
            epsilon: 0.0,
            seed: 0,
            pareto_shape: 1.5,
            pareto_scale: 1.0,
            base_total: 1e9,
            diurnal: DiurnalConfig::default(),
            start_step: 0,
            accuracy: MwConfig::default().accuracy,
            flash: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandSet {
    pub actual: Vec<TrafficMatrix>,
    pub predicted: Vec<TrafficMatrix>,
    pub lambda: f64,
}

/// Actual and predicted sequences, both normalized by the scalar derived
/// from the first actual matrix.
pub fn generate(topo: &Topology, cfg: &DemandConfig) -> Result<DemandSet, DemandError> {
    if cfg.num_tms == 0 {
        return Err(DemandError::InvalidParameter("num_tms must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.epsilon) {
        return Err(DemandError::InvalidParameter(format!("epsilon {}", cfg.epsilon)));
    }
    if topo.hosts().len() < 2 {
        return Err(DemandError::TooFewHosts);
    }
    let mut state = GravityState::with_pareto(topo.hosts(), cfg.pareto_shape, cfg.pareto_scale, cfg.seed);
    let mut actual = Vec::with_capacity(cfg.num_tms);
    let mut predicted = Vec::with_capacity(cfg.num_tms);
    for t in 0..cfg.num_tms {
        let step = cfg.start_step + t as u64;
        let total = cfg.base_total * diurnal_factor(step, cfg.seed, &cfg.diurnal);
        actual.push(gravity_tm(&state, total)?);
        let noisy = perturb_for_prediction(&state, cfg.epsilon, prediction_seed(cfg.seed, t));
        predicted.push(gravity_tm(&noisy, total)?);
        state = mh_step(&state);
    }
    let mw = MwConfig { accuracy: cfg.accuracy, seed: cfg.seed, ..MwConfig::default() };
    let lambda = scale_factor(topo, &actual[0], cfg.scale, &mw)?;
    let mut actual: Vec<TrafficMatrix> = actual.iter().map(|tm| tm.scaled(lambda)).collect();
    if let Some(f) = cfg.flash.filter(|f| f.beta > 0.0) {
        if f.half_life_steps == 0 {
            return Err(DemandError::InvalidParameter(format!("{f:?}")));
        }
        // decay steps are minutes
        let minutes = (1440.0 / cfg.diurnal.steps_per_day).round() as u64;
        let sink = choose_sink(&actual[0], f.sink_seed)?;
        for (t, tm) in actual.iter_mut().enumerate() {
            *tm = flash_burst_to(tm, sink, f.beta, flash_decay(f.half_life_steps, t as u64 * minutes));
        }
    }
    Ok(DemandSet {
        actual,
        predicted: predicted.iter().map(|tm| tm.scaled(lambda)).collect(),
        lambda,
    })
}

/// Metadata written next to generated sequences.
pub fn sidecar(topo: &Topology, cfg: &DemandConfig, set: &DemandSet) -> String {
    let v = serde_json::json!({
        "topology": topo.name(),
        "hosts": topo.hosts().iter().map(|h| topo.node_name(*h)).collect::<Vec<_>>(),
        "config": cfg,
        "lambda": set.lambda,
        "diurnal_template": "fixed weekly template; not fitted to measured traces",
        "step_minutes": 1440.0 / cfg.diurnal.steps_per_day,
    });
    serde_json::to_string_pretty(&v).unwrap() + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hosts(n: u32) -> Vec<NodeId> {
        (0..n).map(NodeId).collect()
    }

    #[test]
    fn matrix_perturbation_matches_weights() {
        let h = hosts(5);
        let st = GravityState::with_pareto(&h, 1.5, 1.0, 4);
        for seed in 0..5 {
            let a = gravity_tm(&perturb_for_prediction(&st, 0.4, seed), 1e6).unwrap();
            let b = perturb_tm(&gravity_tm(&st, 1e6).unwrap(), 0.4, seed);
            for (x, y) in a.dense().iter().zip(b.dense()) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} {y}");
            }
        }
    }

    #[test]
    fn gravity_examples() {
        let s = GravityState::from_weights(&hosts(2), vec![1.0, 1.0], 0).unwrap();
        let tm = gravity_tm(&s, 10.0).unwrap();
        assert_eq!(tm.dense(), &[0.0, 5.0, 5.0, 0.0]);

        let s = GravityState::from_weights(&hosts(3), vec![1.0, 2.0, 3.0], 0).unwrap();
        let tm = gravity_tm(&s, 22.0).unwrap();
        assert!((tm.get_index(0, 1) - 2.0).abs() < 1e-12);
        assert!((tm.get_index(0, 2) - 3.0).abs() < 1e-12);
        assert!((tm.get_index(1, 2) - 6.0).abs() < 1e-12);
        assert!((tm.get_index(2, 1) - 6.0).abs() < 1e-12);
        assert!((tm.total() - 22.0).abs() < 1e-9);
    }

    #[test]
    fn flash_examples() {
        // column of host 2 holds 20 + 20; total 90 over 3 hosts
        let tm = TrafficMatrix::from_dense(&hosts(3), vec![0.0, 25.0, 20.0, 5.0, 0.0, 20.0, 10.0, 10.0, 0.0]).unwrap();
        let out = flash_burst_to(&tm, NodeId(2), 2.0, flash_decay(30, 0));
        assert!((out.get_index(0, 2) - 20.0 - 30.0).abs() < 1e-9);
        let half = flash_burst_to(&tm, NodeId(2), 2.0, flash_decay(30, 30));
        assert!((half.get_index(0, 2) - 20.0 - 15.0).abs() < 1e-9);
        let cfg = FlashConfig { beta: 0.0, ..Default::default() };
        assert_eq!(flash_burst(&tm, &cfg, 0).unwrap(), tm);
        let empty = TrafficMatrix::zeros(&hosts(3));
        assert_eq!(choose_sink(&empty, 1), Err(DemandError::NoEligibleSink));
    }

    #[test]
    fn diurnal_template() {
        let exact = DiurnalConfig { noise: 0.0, ..Default::default() };
        let f = diurnal_factor(72, 9, &exact);
        let expect = 1.0 + 0.3 * (2.0 * PI * 72.0 / 288.0 - PI / 2.0).sin() + 0.1 * (2.0 * PI * 72.0 / 144.0).sin()
            + 0.15 * (2.0 * PI * 72.0 / 2016.0 + PI / 3.0).sin();
        assert!((f - expect).abs() < 1e-12);
        let week = (7.0 * STEPS_PER_DAY) as u64;
        let noisy = DiurnalConfig::default();
        let values: Vec<f64> = (0..week).map(|t| diurnal_factor(t, 3, &noisy)).collect();
        assert!(values.iter().all(|v| *v > 0.0));
        let mean = values.iter().sum::<f64>() / week as f64;
        assert!((mean - 1.0).abs() < 0.05);
    }

    #[test]
    fn perturbation() {
        let s = GravityState::from_weights(&hosts(4), vec![1.0, 2.0, 3.0, 4.0], 0).unwrap();
        assert_eq!(perturb_for_prediction(&s, 0.0, 5), s);
        let p = perturb_for_prediction(&s, 0.8, 5);
        for (a, b) in p.weights.iter().zip(&s.weights) {
            assert!((a - 0.2 * b).abs() < 1e-12 || (a - 1.8 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn mh_is_deterministic() {
        let s = GravityState::with_pareto(&hosts(5), 1.5, 1.0, 11);
        assert_eq!(mh_step(&s), mh_step(&s));
        assert_ne!(mh_step(&s).weights, mh_step(&mh_step(&s)).weights);
    }
}
