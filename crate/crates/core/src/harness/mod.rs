//! Monte Carlo experiments: independent trials, aggregation, comparison with
//! the deterministic limit, and the sweeps behind the phase diagrams.
//!
//! Every trial draws its own subspace, initial estimate and data stream from
//! `trial_rng(seed, trial)`. Trials run on a rayon pool but results are joined
//! in trial order, so aggregates do not depend on scheduling or worker count.

mod compare;
mod experiment;
pub mod output;
mod phase;
mod sweep;
mod toy;

pub use compare::{compare_to_theory, theory_curves, ErrorReport, PointError, TheoryCurves, TheoryMethod};
pub use experiment::{run_experiment, run_trial, AlgorithmSpec, ExperimentConfig, InitSpec, ModelSpec, RunSpec, TrajectoryRecord};
pub use phase::{phase_heatmap, phase_portrait, HeatmapCell, HeatmapConfig, HeatmapResult, PhasePortrait, PortraitConfig};
pub use sweep::{finite_sample_sweep, fit_rate, RateFit, SweepPoint, SweepResult};
pub use toy::{toy_scaling_demo, ToyConfig, ToyRun};

use crate::error::{Error, Result};

/// Run `f` on a pool with `workers` threads (`None` or 0: rayon's default).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(w) if w > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

/// Running mean and sample variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation; 0 for fewer than two values.
    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.std() / (self.count as f64).sqrt()
        }
    }
}
