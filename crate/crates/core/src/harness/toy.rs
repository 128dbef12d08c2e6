use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{with_workers, Welford};
use crate::error::{Error, Result};
use crate::model::trial_rng;

/// The scalar recursion `q_{k+1} = q_k − (τ/n) q_k + n^{−1/2−δ} v_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub tau: f64,
    /// `δ > 0` in the noise scale `n^{−1/2−δ}`.
    pub delta_exp: f64,
    pub q0: f64,
    pub n_list: Vec<usize>,
    /// Rescaled horizon; each run takes `⌊n t_end⌋` steps.
    pub t_end: f64,
    /// Spacing of the recorded times.
    pub record_every: f64,
    pub trials: usize,
    /// Gaussian `v_k` when true, `v_k ≡ 0` otherwise.
    pub noise: bool,
    pub seed: u64,
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_exp > 0.0) {
            return Err(Error::Config(format!("delta_exp must be > 0, got {}", self.delta_exp)));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::Config("n_list must hold positive integers".into()));
        }
        if !(self.t_end > 0.0 && self.record_every > 0.0) {
            return Err(Error::Config("t_end and record_every must be > 0".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let count = (self.t_end / self.record_every + 1e-9).floor() as usize;
        (0..=count).map(|i| i as f64 * self.record_every).collect()
    }

    /// `q₀ e^{−τt}`.
    pub fn limit(&self, t: f64) -> f64 {
        self.q0 * (-self.tau * t).exp()
    }
}

/// Trajectory statistics for one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRun {
    pub n: usize,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub limit: Vec<f64>,
    /// `max_t |mean(t) − q₀e^{−τt}|`.
    pub max_dev: f64,
    /// `trials × times`.
    pub trials: Vec<Vec<f64>>,
}

pub fn toy_scaling_demo(cfg: &ToyConfig, workers: Option<usize>) -> Result<Vec<ToyRun>> {
    cfg.validate()?;
    let times = cfg.times();
    let mut out = Vec::with_capacity(cfg.n_list.len());
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let record: Vec<u64> = times.iter().map(|&t| (n as f64 * t + 1e-9).floor() as u64).collect();
        let scale = (n as f64).powf(-0.5 - cfg.delta_exp);
        let trials: Vec<Vec<f64>> = with_workers(workers, || {
            (0..cfg.trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(cfg.seed, (ni as u64) << 32 | trial);
                    let mut q = cfg.q0;
                    let mut path = Vec::with_capacity(record.len());
                    let mut next = 0;
                    let last = *record.last().unwrap_or(&0);
                    for k in 0..=last {
                        while next < record.len() && record[next] == k {
                            path.push(q);
                            next += 1;
                        }
                        if k == last {
                            break;
                        }
                        let v: f64 = if cfg.noise { rng.sample(StandardNormal) } else { 0.0 };
                        q += -(cfg.tau / n as f64) * q + scale * v;
                    }
                    path
                })
                .collect()
        })?;
        let mut mean = Vec::with_capacity(times.len());
        let mut std = Vec::with_capacity(times.len());
        for ti in 0..times.len() {
            let mut acc = Welford::default();
            trials.iter().for_each(|tr| acc.push(tr[ti]));
            mean.push(acc.mean());
            std.push(acc.std());
        }
        let limit: Vec<f64> = times.iter().map(|&t| cfg.limit(t)).collect();
        let max_dev = mean.iter().zip(&limit).fold(0.0f64, |a, (m, l)| a.max((m - l).abs()));
        out.push(ToyRun {
            n,
            times: times.clone(),
            mean,
            std,
            limit,
            max_dev,
            trials,
        });
    }
    Ok(out)
}
