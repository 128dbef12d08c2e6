use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::theory::{
    integrate_at, inverse_gram_from_cosine, oja_grouse_closed_form, predicted_cosines, squared_cosines_from_inverse_gram,
    OdeParams, OdeState, OdeSystem, DEFAULT_STEP,
};
use crate::trackers::Algorithm;

/// How to evaluate the deterministic limit of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryMethod {
    /// Oja/GROUSE closed form in `P = (QQᵀ)⁻¹`; constant `τ` only.
    ClosedForm,
    /// RK4 on `dQ/dt = F(Q, τ(t) I)`.
    Rk4,
    /// RK4 on the `(A, K, W)` PETRELS system.
    PetrelsFull,
    /// RK4 on the `(Q, G)` PETRELS system.
    PetrelsReduced,
}

impl TheoryMethod {
    /// Closed form when available, otherwise numerical integration.
    pub fn default_for(cfg: &ExperimentConfig) -> Self {
        match cfg.algorithm.name {
            Algorithm::Petrels => TheoryMethod::PetrelsFull,
            _ if cfg.algorithm.step.as_constant().is_some() => TheoryMethod::ClosedForm,
            _ => TheoryMethod::Rk4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TheoryMethod::ClosedForm => "closed_form",
            TheoryMethod::Rk4 => "rk4",
            TheoryMethod::PetrelsFull => "petrels_full",
            TheoryMethod::PetrelsReduced => "petrels_reduced",
        }
    }
}

/// Predicted principal cosines (descending) at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurves {
    pub method: TheoryMethod,
    pub times: Vec<f64>,
    pub cosines: Vec<Vec<f64>>,
    /// Limiting cosine similarity matrices, when the method tracks `Q` itself.
    pub q: Option<Vec<DMatrix<f64>>>,
}

impl TheoryCurves {
    pub fn points(&self) -> Vec<(f64, Vec<f64>)> {
        self.times.iter().copied().zip(self.cosines.iter().cloned()).collect()
    }
}

pub(crate) fn ode_params(cfg: &ExperimentConfig) -> OdeParams {
    OdeParams::new(
        cfg.model.lambdas.clone(),
        cfg.model.sigma,
        cfg.model.alpha,
        cfg.algorithm.step.clone(),
        cfg.algorithm.mu,
    )
}

/// Limit of `cfg` at `times`, started from `Q(0) = diag(q0)`.
pub fn theory_curves(cfg: &ExperimentConfig, times: &[f64], method: TheoryMethod) -> Result<TheoryCurves> {
    let d = cfg.d();
    let q0 = cfg.init.q0_matrix(d)?;
    let params = ode_params(cfg);
    let from_states = |states: Vec<OdeState>| -> Result<TheoryCurves> {
        let cosines = states.iter().map(predicted_cosines).collect::<Result<Vec<_>>>()?;
        let q = states.iter().map(OdeState::cosine_matrix).collect::<Result<Vec<_>>>()?;
        Ok(TheoryCurves {
            method,
            times: times.to_vec(),
            cosines,
            q: Some(q),
        })
    };
    match method {
        TheoryMethod::ClosedForm => {
            let p0 = inverse_gram_from_cosine(&q0)?;
            let mut cosines = Vec::with_capacity(times.len());
            let mut q = Vec::with_capacity(times.len());
            for &t in times {
                let p = oja_grouse_closed_form(&p0, &params, t)?;
                let c2 = squared_cosines_from_inverse_gram(&p)?;
                cosines.push(c2.iter().map(|v| v.max(0.0).sqrt()).collect());
                // with d = 1 the sign of Q is preserved by the flow
                q.push(DMatrix::from_element(1, 1, 1.0 / p[(0, 0)].sqrt()));
            }
            Ok(TheoryCurves {
                method,
                times: times.to_vec(),
                cosines,
                q: (d == 1).then_some(q),
            })
        }
        TheoryMethod::Rk4 => from_states(integrate_at(
            &OdeSystem::OjaGrouse(params),
            &OdeState::oja_grouse(q0),
            times,
            DEFAULT_STEP,
        )?),
        TheoryMethod::PetrelsFull | TheoryMethod::PetrelsReduced => {
            let full0 = OdeState::petrels_full_from_init(q0, cfg.algorithm.delta);
            let states = if method == TheoryMethod::PetrelsFull {
                integrate_at(&OdeSystem::PetrelsFull(params), &full0, times, DEFAULT_STEP)?
            } else {
                integrate_at(&OdeSystem::PetrelsReduced(params), &full0.reduce_petrels()?, times, DEFAULT_STEP)?
            };
            from_states(states)
        }
    }
}

/// Error of the empirical mean at one `(time, direction)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub t: f64,
    pub direction: usize,
    pub mean: f64,
    pub theory: f64,
    pub abs_err: f64,
    /// Standard error of the mean.
    pub sem: f64,
    /// `abs_err ≤ 2·sem`.
    pub within_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub points: Vec<PointError>,
    pub max_abs_err: f64,
    pub rms_err: f64,
    pub all_within_band: bool,
}

impl ErrorReport {
    /// Whether every point lies within `max(floor, 2·sem)` of the prediction.
    pub fn within(&self, floor: f64) -> bool {
        self.points.iter().all(|p| p.abs_err <= floor.max(2.0 * p.sem))
    }

    /// Point with the largest error relative to its `max(floor, 2·sem)` band.
    pub fn worst(&self, floor: f64) -> Option<&PointError> {
        self.points.iter().max_by(|a, b| {
            let ra = a.abs_err / floor.max(2.0 * a.sem);
            let rb = b.abs_err / floor.max(2.0 * b.sem);
            ra.total_cmp(&rb)
        })
    }
}

/// Compare the mean cosines of `record` against `prediction`, a list of
/// `(t, cosines)` on the same time grid.
pub fn compare_to_theory(record: &TrajectoryRecord, prediction: &[(f64, Vec<f64>)]) -> Result<ErrorReport> {
    if prediction.len() != record.times.len() {
        return Err(Error::GridMismatch(format!(
            "{} predicted times for {} recorded",
            prediction.len(),
            record.times.len()
        )));
    }
    let mut points = Vec::with_capacity(prediction.len() * record.d);
    for (ti, ((t, pred), &t_rec)) in prediction.iter().zip(&record.times).enumerate() {
        if (t - t_rec).abs() > 1e-12 * t_rec.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("predicted t = {t}, recorded t = {t_rec}")));
        }
        if pred.len() != record.d {
            return Err(Error::GridMismatch(format!(
                "{} predicted directions, {} recorded",
                pred.len(),
                record.d
            )));
        }
        for (l, &theory) in pred.iter().enumerate() {
            let mean = record.mean[ti][l];
            let sem = record.sem(ti, l);
            let abs_err = (mean - theory).abs();
            points.push(PointError {
                t: t_rec,
                direction: l,
                mean,
                theory,
                abs_err,
                sem,
                within_band: abs_err <= 2.0 * sem,
            });
        }
    }
    let max_abs_err = points.iter().fold(0.0f64, |a, p| a.max(p.abs_err));
    let rms_err = if points.is_empty() {
        0.0
    } else {
        (points.iter().map(|p| p.abs_err * p.abs_err).sum::<f64>() / points.len() as f64).sqrt()
    };
    let all_within_band = points.iter().all(|p| p.within_band);
    Ok(ErrorReport {
        points,
        max_abs_err,
        rms_err,
        all_within_band,
    })
}
