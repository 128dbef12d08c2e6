use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{run_trial, AlgorithmSpec, ExperimentConfig, InitSpec, ModelSpec, RunSpec};
use super::{with_workers, Welford};
use crate::error::{Error, Result};
use crate::schedule::StepSchedule;
use crate::theory::{
    nullcline_f, nullcline_h, petrels_critical_mu, petrels_critical_mu_for_snr, petrels_fixed_point, rhs_q2_g,
    rk4_at_times, FixedPoint, OdeParams, DEFAULT_STEP,
};
use crate::trackers::Algorithm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitConfig {
    /// Initial `(Q², G)` pairs.
    pub starts: Vec<[f64; 2]>,
    pub t_end: f64,
    pub sample_interval: f64,
    /// Nullclines are sampled on `(0, g_max]`.
    pub g_max: f64,
    pub g_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePortrait {
    /// Per start: `(t, Q², G)` samples.
    pub trajectories: Vec<Vec<[f64; 3]>>,
    /// `(G, Q²)` on the `dQ²/dt = 0` nullcline.
    pub nullcline_f: Vec<[f64; 2]>,
    /// `(G, Q²)` on the `dG/dt = 0` nullcline.
    pub nullcline_h: Vec<[f64; 2]>,
    pub fixed_point: FixedPoint,
    pub critical_mu: f64,
}

/// Integrate the `d = 1` PETRELS system in `(Q², G)` from every start and
/// sample both nullclines.
pub fn phase_portrait(p: &OdeParams, cfg: &PortraitConfig) -> Result<PhasePortrait> {
    if p.d() != 1 {
        return Err(Error::UnsupportedDimension(p.d()));
    }
    if !(cfg.t_end > 0.0 && cfg.sample_interval > 0.0 && cfg.g_max > 0.0) || cfg.g_points < 2 {
        return Err(Error::Config(
            "portrait needs t_end, sample_interval, g_max > 0 and g_points >= 2".into(),
        ));
    }
    let count = (cfg.t_end / cfg.sample_interval + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (1..=count).map(|i| i as f64 * cfg.sample_interval).collect();
    if times.last().is_none_or(|&t| t < cfg.t_end - 1e-12) {
        times.push(cfg.t_end);
    }
    let mut trajectories = Vec::with_capacity(cfg.starts.len());
    for &[q2, g] in &cfg.starts {
        let ys = rk4_at_times(
            |_, y, dy| {
                let (a, b) = rhs_q2_g(y[0], y[1], p)?;
                dy[0] = a;
                dy[1] = b;
                Ok(())
            },
            |t, y| {
                if y.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::IntegrationBreakdown {
                        t,
                        reason: "state is no longer finite".into(),
                    })
                }
            },
            &[q2, g],
            0.0,
            &times,
            DEFAULT_STEP,
        )?;
        let mut path = vec![[0.0, q2, g]];
        path.extend(times.iter().zip(ys).map(|(&t, y)| [t, y[0], y[1]]));
        trajectories.push(path);
    }
    let gs: Vec<f64> = (1..=cfg.g_points)
        .map(|i| cfg.g_max * i as f64 / cfg.g_points as f64)
        .collect();
    let nullcline_f = gs
        .iter()
        .map(|&g| Ok([g, nullcline_f(g, p)?]))
        .collect::<Result<Vec<_>>>()?;
    let nullcline_h = gs
        .iter()
        .map(|&g| Ok([g, nullcline_h(g, p)?]))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhasePortrait {
        trajectories,
        nullcline_f,
        nullcline_h,
        fixed_point: petrels_fixed_point(p)?,
        critical_mu: petrels_critical_mu(p)?,
    })
}

/// PETRELS steady-state sweep over `μ` and the signal-to-noise ratio `αλ²/σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapConfig {
    pub mu_grid: Vec<f64>,
    pub snr_grid: Vec<f64>,
    pub n: usize,
    pub t_end: f64,
    pub trials: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub q0: f64,
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub mu: f64,
    pub snr: f64,
    pub lambda: f64,
    pub critical_mu: f64,
    /// Steady `Q²` of the limiting ODE.
    pub theory_q2: f64,
    pub mean_q2: f64,
    pub std_q2: f64,
    /// Per-trial `Q²` at `t_end`.
    pub q2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResult {
    /// Row-major over `snr_grid × mu_grid`.
    pub cells: Vec<HeatmapCell>,
    /// `(snr, critical μ)` on a fine grid spanning `snr_grid`.
    pub boundary: Vec<[f64; 2]>,
}

impl HeatmapResult {
    pub fn cell(&self, snr_index: usize, mu_index: usize, mu_len: usize) -> &HeatmapCell {
        &self.cells[snr_index * mu_len + mu_index]
    }
}

impl HeatmapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu_grid.is_empty() || self.snr_grid.is_empty() {
            return Err(Error::Config("mu_grid and snr_grid must be non-empty".into()));
        }
        if self.mu_grid.iter().chain(&self.snr_grid).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("grid values must be positive".into()));
        }
        if self.trials == 0 || self.n == 0 || !(self.t_end > 0.0) {
            return Err(Error::Config("n, trials and t_end must be positive".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Config("the SNR axis needs sigma > 0".into()));
        }
        Ok(())
    }

    fn lambda(&self, snr: f64) -> f64 {
        (snr * self.sigma * self.sigma / self.alpha).sqrt()
    }

    /// The single-cell experiment behind `(snr, mu)`.
    pub fn cell_config(&self, snr: f64, mu: f64) -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec {
                n: self.n,
                lambdas: vec![self.lambda(snr)],
                sigma: self.sigma,
                alpha: self.alpha,
            },
            algorithm: AlgorithmSpec::new(Algorithm::Petrels, StepSchedule::constant(0.0), mu, self.delta),
            init: InitSpec::uniform(self.q0),
            run: RunSpec {
                horizon: self.t_end,
                record_times: vec![self.t_end],
                trials: self.trials,
                seed: self.seed,
                store_q: false,
            },
        }
    }
}

/// Run PETRELS in every grid cell and overlay the predicted boundary.
///
/// Trial `j` of cell `c` uses stream `c · trials + j`, so every trial in the
/// sweep sees independent data.
pub fn phase_heatmap(cfg: &HeatmapConfig, workers: Option<usize>) -> Result<HeatmapResult> {
    cfg.validate()?;
    let cells: Vec<(f64, f64)> = cfg
        .snr_grid
        .iter()
        .flat_map(|&s| cfg.mu_grid.iter().map(move |&m| (s, m)))
        .collect();
    let configs: Vec<ExperimentConfig> = cells.iter().map(|&(s, m)| cfg.cell_config(s, m)).collect();
    for c in &configs {
        c.validate()?;
    }
    let work: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials as u64).map(move |j| (c, j)))
        .collect();
    let q2: Vec<f64> = with_workers(workers, || {
        work.par_iter()
            .map(|&(c, j)| {
                let out = run_trial(&configs[c], (c * cfg.trials) as u64 + j)?;
                Ok(out.cosines[0][0].powi(2))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut result = Vec::with_capacity(cells.len());
    for (c, &(snr, mu)) in cells.iter().enumerate() {
        let vals = q2[c * cfg.trials..(c + 1) * cfg.trials].to_vec();
        let mut acc = Welford::default();
        vals.iter().for_each(|&v| acc.push(v));
        let p = OdeParams::new(vec![cfg.lambda(snr)], cfg.sigma, cfg.alpha, StepSchedule::constant(0.0), mu);
        result.push(HeatmapCell {
            mu,
            snr,
            lambda: cfg.lambda(snr),
            critical_mu: petrels_critical_mu_for_snr(snr),
            theory_q2: petrels_fixed_point(&p)?.q2(),
            mean_q2: acc.mean(),
            std_q2: acc.std(),
            q2: vals,
        });
    }
    let lo = cfg.snr_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cfg.snr_grid.iter().copied().fold(0.0, f64::max);
    let boundary = (0..=100)
        .map(|i| {
            let s = lo + (hi - lo) * i as f64 / 100.0;
            [s, petrels_critical_mu_for_snr(s)]
        })
        .collect();
    Ok(HeatmapResult {
        cells: result,
        boundary,
    })
}
