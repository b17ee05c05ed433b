//! Per-pair next-matrix prediction from a sliding window of history.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::PredictError;
use crate::model::{NodeId, Topology, TrafficMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictorKind {
    /// Least-squares AR(1) with intercept: `x[t+1] ≈ b + a·x[t]`.
    Linear,
    /// As `Linear` with an L2 penalty `λ·a²` on the slope.
    Ridge(f64),
    /// Polynomial in time. With `l1` the fit minimizes absolute error by
    /// iteratively reweighted least squares instead of squared error.
    Polyfit { degree: usize, l1: bool },
    /// Keeps the largest-magnitude Fourier coefficients of the window.
    FftFit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub window: usize,
    pub cv_folds: usize,
}

impl PredictorConfig {
    pub fn new(kind: PredictorKind, window: usize) -> Self {
        PredictorConfig { kind, window, cv_folds: 5 }
    }

    pub fn validate(&self) -> Result<(), PredictError> {
        let ok = match self.kind {
            PredictorKind::Linear => self.window >= 2,
            PredictorKind::Ridge(l) => self.window >= 2 && l >= 0.0,
            PredictorKind::Polyfit { degree, .. } => self.window > degree,
            PredictorKind::FftFit(k) => k >= 1 && self.window >= 2 * k,
        };
        if ok && self.cv_folds >= 1 {
            Ok(())
        } else {
            Err(PredictError::InvalidConfig(format!("{self:?}")))
        }
    }
}

fn ar1(x: &[f64], lambda: f64) -> f64 {
    let n = (x.len() - 1) as f64;
    let (xs, ys) = (&x[..x.len() - 1], &x[1..]);
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let a = if sxx + lambda > 0.0 { sxy / (sxx + lambda) } else { 0.0 };
    my + a * (x[x.len() - 1] - mx)
}

fn polyfit(x: &[f64], degree: usize, l1: bool) -> f64 {
    let n = x.len();
    // time rescaled to [-1, 1] for conditioning; the next step is 1 + h
    let h = if n > 1 { 2.0 / (n - 1) as f64 } else { 1.0 };
    let t = |i: usize| -1.0 + h * i as f64;
    let design = DMatrix::from_fn(n, degree + 1, |i, j| t(i).powi(j as i32));
    let y = DVector::from_column_slice(x);
    let solve = |w: &DVector<f64>| -> DVector<f64> {
        let a = DMatrix::from_fn(n, degree + 1, |i, j| design[(i, j)] * w[i]);
        let b = DVector::from_fn(n, |i, _| y[i] * w[i]);
        a.svd(true, true).solve(&b, 1e-12).expect("SVD solve")
    };
    let mut coef = solve(&DVector::from_element(n, 1.0));
    if l1 {
        for _ in 0..50 {
            let r = &y - &design * &coef;
            let w = r.map(|v| 1.0 / v.abs().max(1e-9).sqrt());
            coef = solve(&w);
        }
    }
    let next = 1.0 + h;
    (0..=degree).map(|j| coef[j] * next.powi(j as i32)).sum()
}

fn fftfit(x: &[f64], keep: usize) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut bins: Vec<usize> = (0..n).collect();
    bins.sort_by(|a, b| buf[*b].norm().total_cmp(&buf[*a].norm()).then(a.cmp(b)));
    // the periodic extension evaluated one step past the window
    let t = n as f64;
    bins[..keep.min(n)]
        .iter()
        .map(|&k| {
            let phase = 2.0 * std::f64::consts::PI * k as f64 * t / n as f64;
            (buf[k] * Complex::new(phase.cos(), phase.sin())).re
        })
        .sum::<f64>()
        / n as f64
}

/// One-step-ahead forecast from the last `cfg.window` values, clamped at 0.
pub fn predict_series(series: &[f64], cfg: &PredictorConfig) -> Result<f64, PredictError> {
    cfg.validate()?;
    if series.len() < cfg.window {
        return Err(PredictError::InsufficientHistory { need: cfg.window, have: series.len() });
    }
    let x = &series[series.len() - cfg.window..];
    let v = match cfg.kind {
        PredictorKind::Linear => ar1(x, 0.0),
        PredictorKind::Ridge(l) => ar1(x, l),
        PredictorKind::Polyfit { degree, l1 } => polyfit(x, degree, l1),
        PredictorKind::FftFit(k) => fftfit(x, k),
    };
    Ok(if v.is_finite() { v.max(0.0) } else { 0.0 })
}

/// Predicts every host pair independently.
pub fn predict_next(history: &[TrafficMatrix], cfg: &PredictorConfig) -> Result<TrafficMatrix, PredictError> {
    cfg.validate()?;
    if history.len() < cfg.window {
        return Err(PredictError::InsufficientHistory { need: cfg.window, have: history.len() });
    }
    let last = history.last().unwrap();
    let n = last.host_count();
    let mut out = TrafficMatrix::zeros(last.hosts());
    let recent = &history[history.len() - cfg.window..];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let series: Vec<f64> = recent.iter().map(|tm| tm.get_index(i, j)).collect();
                out.set_index(i, j, predict_series(&series, cfg)?);
            }
        }
    }
    Ok(out)
}

fn cv_error(history: &[TrafficMatrix], cfg: &PredictorConfig) -> Option<f64> {
    let len = history.len();
    if len < cfg.window + cfg.cv_folds {
        return None;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for f in 1..=cfg.cv_folds {
        let origin = len - f;
        let pred = predict_next(&history[..origin], cfg).ok()?;
        let actual = &history[origin];
        for (p, a) in pred.dense().iter().zip(actual.dense()) {
            total += (p - a).abs();
        }
        count += actual.dense().len();
    }
    Some(total / count.max(1) as f64)
}

/// Window minimizing rolling-origin mean absolute error over the last
/// `cv_folds` matrices. Ties go to the smaller window.
pub fn choose_window(
    history: &[TrafficMatrix],
    kind: PredictorKind,
    candidates: &[usize],
    cv_folds: usize,
) -> Result<PredictorConfig, PredictError> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(f64, PredictorConfig)> = None;
    for w in sorted {
        let cfg = PredictorConfig { kind, window: w, cv_folds };
        if cfg.validate().is_err() {
            continue;
        }
        if let Some(err) = cv_error(history, &cfg) {
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, cfg));
            }
        }
    }
    best.map(|(_, c)| c).ok_or(PredictError::InsufficientHistory {
        need: candidates.iter().min().copied().unwrap_or(0) + cv_folds,
        have: history.len(),
    })
}

/// Mean cross-validation error of a configuration, exposed for reports.
pub fn cross_validation_error(history: &[TrafficMatrix], cfg: &PredictorConfig) -> Option<f64> {
    cv_error(history, cfg)
}

/// Rolling forecast: element `t` predicts `history[t]` from everything
/// before it. The first `window` matrices are copied through.
pub fn rolling_predictions(history: &[TrafficMatrix], cfg: &PredictorConfig) -> Result<Vec<TrafficMatrix>, PredictError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(history.len());
    for t in 0..history.len() {
        if t < cfg.window {
            out.push(history[t].clone());
        } else {
            out.push(predict_next(&history[..t], cfg)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairError {
    pub src: NodeId,
    pub dst: NodeId,
    pub mae: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub pairs: Vec<PairError>,
    pub mae: f64,
    /// `Σ|predicted − actual| / Σ actual` over all pairs and matrices.
    pub relative_error: f64,
}

fn ratio(err: f64, base: f64) -> f64 {
    if base > 0.0 {
        err / base
    } else if err == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn prediction_error_report(actual: &[TrafficMatrix], predicted: &[TrafficMatrix]) -> Result<ErrorReport, PredictError> {
    if actual.len() != predicted.len() {
        return Err(PredictError::LengthMismatch(actual.len(), predicted.len()));
    }
    let Some(first) = actual.first() else {
        return Ok(ErrorReport { pairs: Vec::new(), mae: 0.0, relative_error: 0.0 });
    };
    let hosts = first.hosts();
    let n = hosts.len();
    let steps = actual.len() as f64;
    let mut pairs = Vec::new();
    let (mut err_all, mut base_all) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (mut err, mut base) = (0.0, 0.0);
            for (a, p) in actual.iter().zip(predicted) {
                err += (p.get_index(i, j) - a.get_index(i, j)).abs();
                base += a.get_index(i, j);
            }
            err_all += err;
            base_all += base;
            pairs.push(PairError { src: hosts[i], dst: hosts[j], mae: err / steps, relative_error: ratio(err, base) });
        }
    }
    let cells = (pairs.len().max(1) as f64) * steps;
    Ok(ErrorReport { pairs, mae: err_all / cells, relative_error: ratio(err_all, base_all) })
}

impl ErrorReport {
    pub fn to_csv(&self, topo: &Topology) -> String {
        let mut out = String::from("pair,mae,relative_error\n");
        for p in &self.pairs {
            let _ = writeln!(out, "{}->{},{},{}", topo.node_name(p.src), topo.node_name(p.dst), p.mae, p.relative_error);
        }
        let _ = writeln!(out, "all,{},{}", self.mae, self.relative_error);
        out
    }
}
