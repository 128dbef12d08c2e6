use serde::{Deserialize, Serialize};

use super::compare::{theory_curves, TheoryMethod};
use super::experiment::{run_experiment, ExperimentConfig};
use super::Welford;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::trackers::Algorithm;

/// Mean finite-`n` error at one ambient dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    /// Mean over trials of `‖Q⁽ⁿ⁾(t*) − Q(t*)‖₂`.
    pub mean_err: f64,
    pub sem_err: f64,
    pub errors: Vec<f64>,
}

/// Least-squares fit of `log err = intercept + slope · log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFit {
    Fitted { slope: f64, intercept: f64 },
    Degenerate { reason: String },
}

impl RateFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RateFit::Fitted { slope, .. } => Some(*slope),
            RateFit::Degenerate { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub t_star: f64,
    pub points: Vec<SweepPoint>,
    pub fit: RateFit,
}

/// Fit the decay rate of `(n, mean error)` pairs on log-log axes.
///
/// Degenerate when fewer than two distinct `n` are given or any error is not
/// strictly positive, since the logarithm is then undefined.
pub fn fit_rate(points: &[(usize, f64)]) -> RateFit {
    let mut distinct: Vec<usize> = points.iter().map(|p| p.0).collect();
    distinct.dedup();
    if distinct.len() < 2 {
        return RateFit::Degenerate {
            reason: "a slope needs at least two distinct n".into(),
        };
    }
    if let Some((n, e)) = points.iter().find(|(_, e)| !(*e > 0.0 && e.is_finite())) {
        return RateFit::Degenerate {
            reason: format!("error {e} at n = {n} has no logarithm"),
        };
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    RateFit::Fitted {
        slope,
        intercept: my - slope * mx,
    }
}

/// Run `base` at each `n` in `n_list` and measure `E‖Q⁽ⁿ⁾(t*) − Q(t*)‖₂`
/// against the limit, then fit the decay rate in `n`.
///
/// `base.run.record_times` is replaced by `[t_star]` and the matrices are stored.
pub fn finite_sample_sweep(
    base: &ExperimentConfig,
    n_list: &[usize],
    t_star: f64,
    workers: Option<usize>,
) -> Result<SweepResult> {
    if n_list.len() < 2 {
        return Err(Error::Config("the rate sweep needs at least two values of n".into()));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("n_list must be strictly increasing".into()));
    }
    if !(t_star >= 0.0 && t_star <= base.run.horizon) {
        return Err(Error::Config(format!(
            "t_star = {t_star} lies outside [0, {}]",
            base.run.horizon
        )));
    }
    let method = match base.algorithm.name {
        Algorithm::Petrels => TheoryMethod::PetrelsFull,
        _ => TheoryMethod::Rk4,
    };
    let limit = theory_curves(base, &[t_star], method)?;
    let q_limit = limit.q.as_ref().map(|q| q[0].clone()).ok_or_else(|| {
        Error::Parameter("the limit does not determine Q for this configuration".into())
    })?;

    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut cfg = base.clone();
        cfg.model.n = n;
        cfg.run.record_times = vec![t_star];
        cfg.run.store_q = true;
        let rec = run_experiment(&cfg, workers)?;
        let qs = rec.q.as_ref().expect("store_q was set");
        let errors: Vec<f64> = qs.iter().map(|tr| spectral_norm(&(&tr[0] - &q_limit))).collect();
        let mut acc = Welford::default();
        errors.iter().for_each(|&e| acc.push(e));
        points.push(SweepPoint {
            n,
            mean_err: acc.mean(),
            sem_err: acc.sem(),
            errors,
        });
    }
    let fit = fit_rate(&points.iter().map(|p| (p.n, p.mean_err)).collect::<Vec<_>>());
    Ok(SweepResult { t_star, points, fit })
}
