use crate::error::Result;
use crate::linalg::{lambda_min, masked_least_squares, psd_inv_sqrt};
use crate::model::Observation;

use super::{SkipReason, StepOutcome, TrackerState};

/// One step of Oja's method with imputation.
///
/// Missing entries of `y` are filled with the current reconstruction `Xŵ`,
/// then `X̃ = X + (τ/n) ŷ ŵᵀ` is pulled back to the Stiefel manifold by
/// symmetric orthogonalization.
pub fn oja_step(state: &mut TrackerState, obs: &Observation) -> Result<StepOutcome> {
    let ls = masked_least_squares(&state.x, obs, state.params.eps);
    if !ls.ok {
        return Ok(state.skip(SkipReason::Conditioning));
    }
    let n = state.n();
    let d = state.d();
    let tau = state.step_size();
    let w = ls.w_hat;

    // ŷ = y + (I − Ω) X ŵ
    let x = state.x.as_slice();
    let yhat = &mut state.scratch;
    for i in 0..n {
        yhat[i] = if obs.mask[i] {
            obs.y[i]
        } else {
            (0..d).map(|j| x[i + j * n] * w[j]).sum()
        };
    }

    let mut x_tilde = state.x.clone();
    let gain = tau / n as f64;
    {
        let xt = x_tilde.as_mut_slice();
        for j in 0..d {
            let c = gain * w[j];
            let col = &mut xt[j * n..(j + 1) * n];
            for (xv, yv) in col.iter_mut().zip(yhat.iter()) {
                *xv += c * yv;
            }
        }
    }

    let gram = x_tilde.tr_mul(&x_tilde);
    if !(lambda_min(&gram) > state.params.eps_prime) {
        return Ok(state.skip(SkipReason::GramGuard));
    }
    let s = psd_inv_sqrt(&gram)?;
    state.x = x_tilde * s;
    Ok(state.accept())
}
