use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{with_workers, Welford};
use crate::error::{Error, Result};
use crate::model::{correlated_init_diag, generate_subspace, trial_rng, validate_params, SubspaceModel};
use crate::schedule::StepSchedule;
use crate::trackers::{record_step, run_stream, Algorithm, TrackerParams, TrackerState, DEFAULT_EPS_PRIME, DEFAULT_REORTH_EVERY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
}

impl ModelSpec {
    pub fn d(&self) -> usize {
        self.lambdas.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: Algorithm,
    /// `τ(t)` for Oja and GROUSE.
    pub step: StepSchedule,
    /// PETRELS discount.
    pub mu: f64,
    /// PETRELS initial gain scale.
    pub delta: f64,
    /// Conditioning guard; `α/2` when absent.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default = "default_eps_prime")]
    pub eps_prime: f64,
    #[serde(default = "default_reorth")]
    pub reorth_every: u64,
}

fn default_eps_prime() -> f64 {
    DEFAULT_EPS_PRIME
}

fn default_reorth() -> u64 {
    DEFAULT_REORTH_EVERY
}

impl AlgorithmSpec {
    pub fn new(name: Algorithm, step: StepSchedule, mu: f64, delta: f64) -> Self {
        Self {
            name,
            step,
            mu,
            delta,
            eps: None,
            eps_prime: DEFAULT_EPS_PRIME,
            reorth_every: DEFAULT_REORTH_EVERY,
        }
    }

    pub fn tracker_params(&self, alpha: f64) -> TrackerParams {
        let mut p = TrackerParams::with_defaults(alpha, self.step.clone(), self.mu, self.delta);
        if let Some(eps) = self.eps {
            p.eps = eps;
        }
        p.eps_prime = self.eps_prime;
        p.reorth_every = self.reorth_every;
        p
    }
}

/// Initial principal cosines: one value for every direction or one per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    #[serde(with = "scalar_or_vec")]
    pub q0: Vec<f64>,
}

impl InitSpec {
    pub fn uniform(q0: f64) -> Self {
        Self { q0: vec![q0] }
    }

    /// Per-direction cosines for dimension `d`.
    pub fn resolve(&self, d: usize) -> Result<Vec<f64>> {
        match self.q0.len() {
            1 => Ok(vec![self.q0[0]; d]),
            len if len == d => Ok(self.q0.clone()),
            len => Err(Error::Config(format!("init.q0 has {len} entries for d = {d}"))),
        }
    }

    pub fn q0_matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.resolve(d)?)))
    }
}

mod scalar_or_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        if v.len() == 1 {
            s.serialize_f64(v[0])
        } else {
            s.collect_seq(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(match OneOrMany::deserialize(d)? {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Horizon `T` in rescaled time; the stream has `⌊nT⌋` samples.
    pub horizon: f64,
    pub record_times: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Keep the full cosine similarity matrices of every trial.
    #[serde(default)]
    pub store_q: bool,
}

/// Everything needed to reproduce one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub algorithm: AlgorithmSpec,
    pub init: InitSpec,
    pub run: RunSpec,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        validate_params(m.n, m.d(), &m.lambdas, m.sigma, m.alpha).map_err(config_error)?;
        self.algorithm
            .tracker_params(m.alpha)
            .validate(self.algorithm.name, m.alpha)
            .map_err(config_error)?;
        let q0 = self.init.resolve(m.d())?;
        if let Some(bad) = q0.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
            return Err(Error::Config(format!("init.q0 must lie in (0, 1], got {bad}")));
        }
        let r = &self.run;
        if r.trials == 0 {
            return Err(Error::Config("run.trials must be >= 1".into()));
        }
        if !(r.horizon > 0.0 && r.horizon.is_finite()) {
            return Err(Error::Config(format!("run.horizon must be > 0, got {}", r.horizon)));
        }
        if r.record_times.is_empty() {
            return Err(Error::Config("run.record_times is empty".into()));
        }
        if r.record_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("run.record_times must be strictly increasing".into()));
        }
        if r.record_times.iter().any(|&t| !(t >= 0.0 && t <= r.horizon)) {
            return Err(Error::Config(format!(
                "run.record_times must lie in [0, {}]",
                r.horizon
            )));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.model.d()
    }

    /// Number of samples per trial.
    pub fn steps(&self) -> u64 {
        record_step(self.model.n, self.run.horizon)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Parameter(m) | Error::Dimension(m) => Error::Config(m),
        other => other,
    }
}

/// Monte Carlo trajectories and their aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub d: usize,
    /// `trials × times × d` principal cosines, each row descending.
    pub cosines: Vec<Vec<Vec<f64>>>,
    /// `times × d`.
    pub mean: Vec<Vec<f64>>,
    /// Sample standard deviation, `times × d`.
    pub std: Vec<Vec<f64>>,
    /// `trials × times` cosine similarity matrices, when requested.
    pub q: Option<Vec<Vec<DMatrix<f64>>>>,
    /// Skipped samples per trial.
    pub skips: Vec<u64>,
    pub steps: u64,
    /// Largest `max |XᵀX − I|` seen at any record time (Oja/GROUSE).
    pub max_orth_defect: f64,
}

impl TrajectoryRecord {
    /// Aggregate per-trial cosines in trial order.
    pub fn from_trials(times: Vec<f64>, cosines: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let d = cosines
            .first()
            .and_then(|tr| tr.first())
            .map(Vec::len)
            .ok_or_else(|| Error::Parameter("no trials to aggregate".into()))?;
        if cosines
            .iter()
            .any(|tr| tr.len() != times.len() || tr.iter().any(|row| row.len() != d))
        {
            return Err(Error::Dimension("ragged per-trial cosine data".into()));
        }
        let mut acc = vec![vec![Welford::default(); d]; times.len()];
        for trial in &cosines {
            for (ti, row) in trial.iter().enumerate() {
                for (l, &c) in row.iter().enumerate() {
                    acc[ti][l].push(c);
                }
            }
        }
        let mean = acc.iter().map(|r| r.iter().map(Welford::mean).collect()).collect();
        let std = acc.iter().map(|r| r.iter().map(Welford::std).collect()).collect();
        Ok(Self {
            times,
            d,
            skips: vec![0; cosines.len()],
            cosines,
            mean,
            std,
            q: None,
            steps: 0,
            max_orth_defect: 0.0,
        })
    }

    pub fn n_trials(&self) -> usize {
        self.cosines.len()
    }

    /// Standard error of the mean at time index `ti`, direction `l`.
    pub fn sem(&self, ti: usize, l: usize) -> f64 {
        self.std[ti][l] / (self.n_trials() as f64).sqrt()
    }

    pub fn total_skips(&self) -> u64 {
        self.skips.iter().sum()
    }

    /// Largest gap between the stored aggregates and a two-pass recomputation.
    pub fn aggregate_discrepancy(&self) -> f64 {
        let m = self.n_trials() as f64;
        let mut worst = 0.0f64;
        for ti in 0..self.times.len() {
            for l in 0..self.d {
                let vals: Vec<f64> = self.cosines.iter().map(|tr| tr[ti][l]).collect();
                let mean = vals.iter().sum::<f64>() / m;
                let std = if vals.len() < 2 {
                    0.0
                } else {
                    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
                };
                worst = worst
                    .max((mean - self.mean[ti][l]).abs())
                    .max((std - self.std[ti][l]).abs());
            }
        }
        worst
    }
}

/// Output of a single trial.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub cosines: Vec<Vec<f64>>,
    pub q: Option<Vec<DMatrix<f64>>>,
    pub skips: u64,
    pub max_orth_defect: f64,
}

/// Run trial `trial` of `cfg`: fresh subspace, initial estimate and stream,
/// all drawn from `trial_rng(cfg.run.seed, trial)`.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialOutput> {
    let m = &cfg.model;
    let mut rng = trial_rng(cfg.run.seed, trial);
    let u = generate_subspace(m.n, m.d(), &mut rng)?;
    let x0 = correlated_init_diag(&u, &cfg.init.resolve(m.d())?, &mut rng)?;
    let model = SubspaceModel::new(u, m.lambdas.clone(), m.sigma, m.alpha)?;
    let params = cfg.algorithm.tracker_params(m.alpha);
    let mut state = TrackerState::new(cfg.algorithm.name, x0, params, m.alpha)?;
    let rec = run_stream(
        &mut state,
        &model,
        cfg.steps(),
        &cfg.run.record_times,
        &mut rng,
        cfg.run.store_q,
    )?;
    Ok(TrialOutput {
        cosines: rec.cosines,
        q: rec.q,
        skips: rec.skips,
        max_orth_defect: rec.orth_defect.iter().fold(0.0, |a: f64, &b| a.max(b)),
    })
}

/// Run all trials of `cfg` on `workers` threads and aggregate them.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let outputs = with_workers(workers, || {
        (0..cfg.run.trials as u64)
            .into_par_iter()
            .map(|trial| run_trial(cfg, trial))
            .collect::<Result<Vec<_>>>()
    })??;
    let orth = outputs.iter().fold(0.0f64, |a, o| a.max(o.max_orth_defect));
    let skips = outputs.iter().map(|o| o.skips).collect();
    let q: Option<Vec<_>> = cfg.run.store_q.then(|| outputs.iter().map(|o| o.q.clone().unwrap_or_default()).collect());
    let cosines = outputs.into_iter().map(|o| o.cosines).collect();
    let mut rec = TrajectoryRecord::from_trials(cfg.run.record_times.clone(), cosines)?;
    rec.q = q;
    rec.skips = skips;
    rec.steps = cfg.steps();
    rec.max_orth_defect = orth;
    Ok(rec)
}
