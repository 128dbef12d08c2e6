//! Deterministic high-dimensional limits of the three trackers.
//!
//! The cosine similarity matrix of Oja and GROUSE follows
//! `dQ/dt = F(Q, τ(t) I)`; PETRELS follows a coupled `(A, K, W)` system, which
//! for diagonal initial conditions reduces to `dQ/dt = F(Q, G)`,
//! `dG/dt = H(Q, G)` with `G` acting as an adaptive step size. The signal
//! strength and subsampling ratio only ever enter through the product `αΛ²`.

mod closed_form;
mod integrate;
mod phase;
mod rhs;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_inv_sqrt, singular_values_desc, sym_eigen};
use crate::schedule::StepSchedule;

pub use closed_form::{
    inverse_gram_from_cosine, oja_grouse_closed_form, oja_grouse_closed_form_general,
    squared_cosines_from_inverse_gram, z_entry,
};
pub use integrate::{integrate, integrate_at, rk4_at_times, OdeSystem, DEFAULT_STEP};
pub use phase::{
    nullcline_f, nullcline_h, oja_grouse_critical_tau, petrels_critical_mu,
    petrels_critical_mu_for_snr, petrels_fixed_point, rhs_q2_g, steady_state_cos2, FixedPoint,
};
pub use rhs::{rhs_f, rhs_h, rhs_inverse_gram, rhs_petrels_full};

/// Parameters of the limiting ODEs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeParams {
    pub lambdas: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
    /// Step schedule for Oja/GROUSE.
    pub tau: StepSchedule,
    /// PETRELS discount parameter.
    pub mu: f64,
}

impl OdeParams {
    pub fn new(lambdas: Vec<f64>, sigma: f64, alpha: f64, tau: StepSchedule, mu: f64) -> Self {
        Self {
            lambdas,
            sigma,
            alpha,
            tau,
            mu,
        }
    }

    pub fn d(&self) -> usize {
        self.lambdas.len()
    }

    /// Diagonal entries of `αΛ²`.
    pub fn alpha_lambda2(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| self.alpha * l * l).collect()
    }

    pub(crate) fn alpha_lambda2_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.alpha_lambda2()))
    }

    /// Same limit with subsampling ratio `alpha_hat` and `Λ` rescaled by `√(α/α̂)`.
    pub fn with_equivalent_alpha(&self, alpha_hat: f64) -> Self {
        let scale = (self.alpha / alpha_hat).sqrt();
        Self {
            lambdas: self.lambdas.iter().map(|l| l * scale).collect(),
            alpha: alpha_hat,
            ..self.clone()
        }
    }
}

/// State variables of one of the limiting systems.
#[derive(Debug, Clone, PartialEq)]
pub enum OdeVars {
    /// Oja/GROUSE cosine similarity matrix.
    OjaGrouse { q: DMatrix<f64> },
    /// PETRELS in `(Q, G)` form; `G` diagonal.
    PetrelsReduced { q: DMatrix<f64>, g: DMatrix<f64> },
    /// PETRELS in `(A, K, W)` form.
    PetrelsFull {
        a: DMatrix<f64>,
        k: DMatrix<f64>,
        w: DMatrix<f64>,
    },
    /// Oja/GROUSE in the linearizing variable `P = (QQᵀ)⁻¹`.
    InverseGram { p: DMatrix<f64> },
}

/// Theory-side state at rescaled time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeState {
    pub t: f64,
    pub vars: OdeVars,
}

impl OdeState {
    pub fn oja_grouse(q: DMatrix<f64>) -> Self {
        Self {
            t: 0.0,
            vars: OdeVars::OjaGrouse { q },
        }
    }

    /// Full PETRELS state matching a tracker started from `R₀ = (δ/n) I` and
    /// an orthonormal `X₀` with `UᵀX₀ = q0`: `A = I/δ`, `K = q0`, `W = I`.
    pub fn petrels_full_from_init(q0: DMatrix<f64>, delta: f64) -> Self {
        let d = q0.nrows();
        Self {
            t: 0.0,
            vars: OdeVars::PetrelsFull {
                a: DMatrix::identity(d, d) / delta,
                k: q0,
                w: DMatrix::identity(d, d),
            },
        }
    }

    /// Map a full PETRELS state to `(Q, G) = (K W^{-1/2}, W^{-1/2} A⁻¹ W^{-1/2})`.
    pub fn reduce_petrels(&self) -> Result<Self> {
        match &self.vars {
            OdeVars::PetrelsFull { a, k, w } => {
                let w_isqrt = psd_inv_sqrt(w)?;
                let a_inv = a
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Singular("A".into()))?;
                Ok(Self {
                    t: self.t,
                    vars: OdeVars::PetrelsReduced {
                        q: k * &w_isqrt,
                        g: &w_isqrt * a_inv * &w_isqrt,
                    },
                })
            }
            _ => Err(Error::Parameter("expected a full PETRELS state".into())),
        }
    }

    /// Cosine similarity matrix implied by the state.
    pub fn cosine_matrix(&self) -> Result<DMatrix<f64>> {
        match &self.vars {
            OdeVars::OjaGrouse { q } | OdeVars::PetrelsReduced { q, .. } => Ok(q.clone()),
            OdeVars::PetrelsFull { k, w, .. } => Ok(k * psd_inv_sqrt(w)?),
            OdeVars::InverseGram { .. } => Err(Error::Parameter(
                "P = (QQᵀ)⁻¹ determines Q only up to rotation".into(),
            )),
        }
    }
}

/// Predicted principal cosines, sorted descending.
pub fn predicted_cosines(state: &OdeState) -> Result<Vec<f64>> {
    match &state.vars {
        OdeVars::InverseGram { p } => Ok(squared_cosines_from_inverse_gram(p)?
            .into_iter()
            .map(|c2| c2.max(0.0).sqrt())
            .collect()),
        _ => Ok(singular_values_desc(&state.cosine_matrix()?)),
    }
}

pub(crate) fn is_diagonal(m: &DMatrix<f64>, tol: f64) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)].abs() <= tol))
}

pub(crate) fn require_spd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * m.amax().max(1.0) {
        return Err(Error::Parameter(format!("{what} is not symmetric")));
    }
    let (vals, _) = sym_eigen(&(0.5 * (m + m.transpose())));
    if vals.first().is_some_and(|&v| !(v > 0.0)) {
        return Err(Error::Parameter(format!("{what} is not positive definite")));
    }
    Ok(())
}
