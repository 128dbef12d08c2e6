//! Streaming subspace trackers: Oja with imputation, GROUSE and simplified PETRELS.
//!
//! All three share one state machine: feed an [`Observation`], the tracker
//! either accepts it (and updates `X`, plus `R` for PETRELS) or skips it
//! because a conditioning guard fired. Skips are counted, never errors.

mod grouse;
mod oja;
mod petrels;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cosine_similarity, orthonormalize, orthonormality_defect};
use crate::model::{sample_observation_into, Observation, SubspaceModel};
use crate::schedule::StepSchedule;

pub use grouse::grouse_step;
pub use oja::oja_step;
pub use petrels::petrels_step;

/// Which streaming algorithm a tracker runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Oja,
    Grouse,
    Petrels,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Oja => "oja",
            Algorithm::Grouse => "grouse",
            Algorithm::Petrels => "petrels",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Default GROUSE re-orthonormalization cadence, in steps.
pub const DEFAULT_REORTH_EVERY: u64 = 1000;

/// Default Oja post-update Gram guard.
pub const DEFAULT_EPS_PRIME: f64 = 0.1;

/// Tuning parameters shared by the trackers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerParams {
    /// `τ(t)` for Oja and GROUSE.
    pub step_schedule: StepSchedule,
    /// PETRELS discount, `γ = 1 − μ/n`.
    pub mu: f64,
    /// PETRELS `R₀ = (δ/n) I`.
    pub delta: f64,
    /// Guard on `λ_min(XᵀΩX)`; must be below `α`.
    pub eps: f64,
    /// Oja guard on `λ_min(X̃ᵀX̃)`.
    pub eps_prime: f64,
    /// GROUSE re-orthonormalization cadence.
    pub reorth_every: u64,
    /// Check the PETRELS Woodbury update against a direct inverse every step.
    #[serde(default)]
    pub check_invariants: bool,
}

impl TrackerParams {
    /// Defaults for a model with subsampling ratio `alpha`: `ε = α/2`, `ε′ = 0.1`.
    pub fn with_defaults(alpha: f64, step_schedule: StepSchedule, mu: f64, delta: f64) -> Self {
        Self {
            step_schedule,
            mu,
            delta,
            eps: alpha / 2.0,
            eps_prime: DEFAULT_EPS_PRIME,
            reorth_every: DEFAULT_REORTH_EVERY,
            check_invariants: false,
        }
    }

    pub fn validate(&self, algo: Algorithm, alpha: f64) -> Result<()> {
        self.step_schedule.validate()?;
        if !(self.eps > 0.0 && self.eps < alpha) {
            return Err(Error::Parameter(format!(
                "eps must satisfy 0 < eps < alpha = {alpha}, got {}",
                self.eps
            )));
        }
        if !(self.eps_prime > 0.0 && self.eps_prime < 1.0) {
            return Err(Error::Parameter(format!(
                "eps_prime must lie in (0, 1), got {}",
                self.eps_prime
            )));
        }
        if algo == Algorithm::Petrels {
            if !(self.mu > 0.0 && self.mu.is_finite()) {
                return Err(Error::Parameter(format!("mu must be > 0, got {}", self.mu)));
            }
            if !(self.delta > 0.0 && self.delta.is_finite()) {
                return Err(Error::Parameter(format!("delta must be > 0, got {}", self.delta)));
            }
        }
        if self.reorth_every == 0 {
            return Err(Error::Parameter("reorth_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Why a step left the estimate untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// `λ_min(XᵀΩX) ≤ ε`.
    Conditioning,
    /// Oja: `λ_min(X̃ᵀX̃) ≤ ε′`.
    GramGuard,
    /// GROUSE: `‖p‖`, `‖r‖` or `‖ŵ‖` vanished.
    DegenerateRotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Skipped(SkipReason),
}

/// Streaming state of one tracker.
#[derive(Debug, Clone)]
pub struct TrackerState {
    pub algo: Algorithm,
    /// `n × d` estimate.
    pub x: DMatrix<f64>,
    /// PETRELS gain, `d × d` symmetric PD; `None` for Oja and GROUSE.
    pub r: Option<DMatrix<f64>>,
    /// Steps consumed so far (accepted or skipped).
    pub k: u64,
    pub skips: u64,
    pub params: TrackerParams,
    /// Subsampling ratio of the stream being tracked.
    pub alpha: f64,
    scratch: Vec<f64>,
}

impl TrackerState {
    /// Start a tracker from `x0`. Oja and GROUSE require orthonormal `x0`.
    pub fn new(algo: Algorithm, x0: DMatrix<f64>, params: TrackerParams, alpha: f64) -> Result<Self> {
        params.validate(algo, alpha)?;
        let (n, d) = x0.shape();
        if d == 0 || d > n {
            return Err(Error::Dimension(format!("need 1 <= d <= n, got {n}x{d}")));
        }
        if algo == Algorithm::Petrels && !(params.mu < n as f64) {
            return Err(Error::Parameter(format!(
                "PETRELS needs mu < n so that 1 - mu/n > 0, got mu = {} with n = {n}",
                params.mu
            )));
        }
        if algo != Algorithm::Petrels && orthonormality_defect(&x0) > 1e-8 {
            return Err(Error::Parameter(
                "Oja and GROUSE need an orthonormal initial estimate".into(),
            ));
        }
        let r = (algo == Algorithm::Petrels)
            .then(|| DMatrix::identity(d, d) * (params.delta / n as f64));
        Ok(Self {
            algo,
            x: x0,
            r,
            k: 0,
            skips: 0,
            params,
            alpha,
            scratch: vec![0.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Rescaled time of the next step, `k/n`.
    pub fn time(&self) -> f64 {
        self.k as f64 / self.n() as f64
    }

    /// Ingest one observation with the configured algorithm.
    pub fn step(&mut self, obs: &Observation) -> Result<StepOutcome> {
        if obs.len() != self.n() {
            return Err(Error::Dimension(format!(
                "observation has {} entries, tracker expects {}",
                obs.len(),
                self.n()
            )));
        }
        match self.algo {
            Algorithm::Oja => oja_step(self, obs),
            Algorithm::Grouse => grouse_step(self, obs),
            Algorithm::Petrels => petrels_step(self, obs),
        }
    }

    pub(crate) fn skip(&mut self, reason: SkipReason) -> StepOutcome {
        self.k += 1;
        self.skips += 1;
        StepOutcome::Skipped(reason)
    }

    pub(crate) fn accept(&mut self) -> StepOutcome {
        self.k += 1;
        StepOutcome::Accepted
    }

    pub(crate) fn step_size(&self) -> f64 {
        self.params.step_schedule.at(self.time())
    }
}

/// Orthonormal basis of the current estimate: `X` itself for Oja/GROUSE,
/// `X (XᵀX)^{-1/2}` for PETRELS.
pub fn estimate(state: &TrackerState) -> Result<DMatrix<f64>> {
    match state.algo {
        Algorithm::Oja | Algorithm::Grouse => Ok(state.x.clone()),
        Algorithm::Petrels => orthonormalize(&state.x),
    }
}

/// Per-trial record of principal cosines at the requested rescaled times.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub times: Vec<f64>,
    /// `times.len()` rows of `d` cosines, descending.
    pub cosines: Vec<Vec<f64>>,
    /// Full cosine similarity matrices, when requested.
    pub q: Option<Vec<DMatrix<f64>>>,
    /// `max |XᵀX − I|` at each record time (meaningful for Oja/GROUSE).
    pub orth_defect: Vec<f64>,
    pub steps: u64,
    pub skips: u64,
}

/// Step index at which rescaled time `t` is recorded: `⌊n t⌋`.
pub fn record_step(n: usize, t: f64) -> u64 {
    // guard against 0.25 * 2000 = 499.999… style roundoff
    (n as f64 * t + 1e-9).floor() as u64
}

/// Drive `state` through `steps` fresh samples of `model`, recording the
/// cosines with the truth at `k = ⌊n t⌋` for each `t` in `record_times`.
pub fn run_stream(
    state: &mut TrackerState,
    model: &SubspaceModel,
    steps: u64,
    record_times: &[f64],
    rng: &mut impl Rng,
    store_q: bool,
) -> Result<StreamRecord> {
    if model.n != state.n() || model.d != state.d() {
        return Err(Error::Dimension(format!(
            "model is {}x{}, tracker is {}x{}",
            model.n,
            model.d,
            state.n(),
            state.d()
        )));
    }
    if record_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("record times must be sorted ascending".into()));
    }
    let record_at: Vec<u64> = record_times.iter().map(|&t| record_step(model.n, t)).collect();
    if record_times.iter().any(|&t| t < 0.0) || record_at.last().is_some_and(|&k| k > steps) {
        return Err(Error::Parameter(format!(
            "record times must lie in [0, {}]",
            steps as f64 / model.n as f64
        )));
    }

    let mut out = StreamRecord {
        times: record_times.to_vec(),
        cosines: Vec::with_capacity(record_times.len()),
        q: store_q.then(Vec::new),
        orth_defect: Vec::with_capacity(record_times.len()),
        steps,
        skips: 0,
    };
    let skips_before = state.skips;
    let mut obs = Observation::empty(model.n);
    let mut next = 0;
    for k in 0..=steps {
        while next < record_at.len() && record_at[next] == k {
            let basis = estimate(state)?;
            let cs = cosine_similarity(&model.u, &basis)?;
            out.orth_defect.push(orthonormality_defect(&state.x));
            out.cosines.push(cs.cosines);
            if let Some(q) = out.q.as_mut() {
                q.push(cs.q);
            }
            next += 1;
        }
        if k == steps {
            break;
        }
        sample_observation_into(model, state.k, rng, &mut obs);
        state.step(&obs)?;
    }
    out.skips = state.skips - skips_before;
    Ok(out)
}

#[cfg(test)]
mod tests;
