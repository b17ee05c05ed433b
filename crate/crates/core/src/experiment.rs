//! Experiment plumbing shared by the command line driver: input
//! preparation, run naming and cross-algorithm tables.

use std::fmt::Write as _;

use crate::demands::{perturb_tm, prediction_seed, scale_factor};
use crate::error::{Error, SimError};
use crate::mcf::MwConfig;
use crate::model::{AlgorithmKind, Topology, TrafficMatrix};
use crate::sim::{metrics_rollup, simulate, SimConfig, SimReport, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub topology: Topology,
    pub actual: Vec<TrafficMatrix>,
    /// Falls back to the actual sequence when absent.
    pub predicted: Option<Vec<TrafficMatrix>>,
    pub algorithms: Vec<AlgorithmKind>,
    pub sim: SimConfig,
    /// Rescales both sequences so the first actual matrix has optimal
    /// congestion `0.4·S`.
    pub scale: Option<f64>,
    /// Multiplicative weight error applied to the predicted sequence.
    pub prediction_error: Option<f64>,
}

/// Actual and predicted sequences after scaling and prediction error.
pub fn prepare(spec: &RunSpec) -> Result<(Vec<TrafficMatrix>, Vec<TrafficMatrix>), Error> {
    if spec.algorithms.is_empty() {
        return Err(SimError::InvalidConfig("no algorithms given".into()).into());
    }
    let mut actual = spec.actual.clone();
    let mut predicted = spec.predicted.clone().unwrap_or_else(|| actual.clone());
    if actual.len() != predicted.len() {
        return Err(SimError::LengthMismatch(actual.len(), predicted.len()).into());
    }
    if let Some(eps) = spec.prediction_error {
        if !(0.0..1.0).contains(&eps) {
            return Err(SimError::InvalidConfig(format!("prediction error {eps} outside [0, 1)")).into());
        }
        predicted = predicted.iter().enumerate().map(|(t, tm)| perturb_tm(tm, eps, prediction_seed(spec.sim.seed, t))).collect();
    }
    if let (Some(s), Some(first)) = (spec.scale, actual.first()) {
        let mw = MwConfig { strict: false, ..spec.sim.mw };
        let lambda = scale_factor(&spec.topology, first, s, &mw)?;
        actual = actual.iter().map(|tm| tm.scaled(lambda)).collect();
        predicted = predicted.iter().map(|tm| tm.scaled(lambda)).collect();
    }
    Ok((actual, predicted))
}

/// `<algo>__<topo>__S<S>__phi<φ>__b<budget|unc>__seed<seed>`.
pub fn run_stem(kind: AlgorithmKind, topo: &str, scale: Option<f64>, sim: &SimConfig) -> String {
    let s = scale.map_or("raw".to_string(), |s| s.to_string());
    let b = sim.budget.map_or("unc".to_string(), |b| b.to_string());
    format!("{}__{}__S{}__phi{}__b{}__seed{}", kind.name(), topo, s, sim.phi, b, sim.seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub kind: AlgorithmKind,
    pub stem: String,
    pub report: SimReport,
    pub summary: Summary,
}

pub fn run_one(
    spec: &RunSpec,
    kind: AlgorithmKind,
    actual: &[TrafficMatrix],
    predicted: &[TrafficMatrix],
) -> Result<RunOutput, SimError> {
    let report = simulate(&spec.topology, kind, actual, predicted, &spec.sim)?;
    let summary = metrics_rollup(&report);
    Ok(RunOutput { kind, stem: run_stem(kind, spec.topology.name(), spec.scale, &spec.sim), report, summary })
}

/// One row per algorithm; solver time only when `timings` is set.
pub fn comparison_csv(summaries: &[Summary], timings: bool) -> String {
    let mut out = String::from(
        "algorithm,topology,tms,mean_congestion,max_congestion,mean_offered_congestion,throughput,\
         congestion_loss_fraction,failure_loss_fraction,p50_latency,p80_latency,p99_latency,total_churn,\
         mean_paths_per_pair",
    );
    if timings {
        out.push_str(",solver_seconds");
    }
    out.push('\n');
    let pct = |s: &Summary, p: f64| s.latency_percentiles.iter().find(|x| x.0 == p).map_or(0.0, |x| x.1);
    for s in summaries {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.algorithm,
            s.topology,
            s.tms,
            s.mean_congestion,
            s.max_congestion,
            s.mean_offered_congestion,
            s.throughput,
            s.congestion_loss_fraction,
            s.failure_loss_fraction,
            pct(s, 0.5),
            pct(s, 0.8),
            pct(s, 0.99),
            s.total_churn,
            s.mean_paths_per_pair
        );
        if timings {
            let _ = write!(out, ",{}", s.solver_time_total.unwrap_or(0.0));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems() {
        let sim = SimConfig { budget: Some(3), phi: 1, seed: 7, ..SimConfig::default() };
        assert_eq!(run_stem(AlgorithmKind::Spf, "abilene", Some(2.5), &sim), "spf__abilene__S2.5__phi1__b3__seed7");
        let sim = SimConfig::default();
        assert_eq!(run_stem(AlgorithmKind::Raecke, "x", Some(1.0), &sim), "raecke__x__S1__phi0__bunc__seed0");
    }
}
