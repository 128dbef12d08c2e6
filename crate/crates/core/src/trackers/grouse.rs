use crate::error::Result;
use crate::linalg::{masked_least_squares, orthonormalize};
use crate::model::Observation;

use super::{SkipReason, StepOutcome, TrackerState};

const DEGENERATE_NORM: f64 = 1e-14;

/// One GROUSE step: a geodesic rotation on the Grassmannian.
///
/// With `p = Xŵ` and the observed residual `r = y − Ωp`, the column
/// direction `ŵ/‖ŵ‖` of `X` is rotated by `θ = (τ/n)‖r‖‖p‖` towards `r`.
/// The update is orthogonal in exact arithmetic; every `reorth_every` steps
/// the estimate is re-orthonormalized to stop roundoff drift.
pub fn grouse_step(state: &mut TrackerState, obs: &Observation) -> Result<StepOutcome> {
    let ls = masked_least_squares(&state.x, obs, state.params.eps);
    if !ls.ok {
        return Ok(state.skip(SkipReason::Conditioning));
    }
    let n = state.n();
    let d = state.d();
    let tau = state.step_size();
    let w = ls.w_hat;

    let x = state.x.as_slice();
    let p = &mut state.scratch;
    let mut p_norm2 = 0.0;
    for i in 0..n {
        let v: f64 = (0..d).map(|j| x[i + j * n] * w[j]).sum();
        p[i] = v;
        p_norm2 += v * v;
    }
    // r is supported on the observed coordinates only
    let mut r_norm2 = 0.0;
    for &i in &obs.observed {
        let v = obs.y[i] - p[i];
        r_norm2 += v * v;
    }
    let (p_norm, r_norm, w_norm) = (p_norm2.sqrt(), r_norm2.sqrt(), w.norm());
    if p_norm < DEGENERATE_NORM || r_norm < DEGENERATE_NORM || w_norm < DEGENERATE_NORM {
        return Ok(state.skip(SkipReason::DegenerateRotation));
    }

    let theta = tau / n as f64 * r_norm * p_norm;
    let a = (theta.cos() - 1.0) / p_norm;
    let b = theta.sin() / r_norm;
    let xm = state.x.as_mut_slice();
    for j in 0..d {
        let c = w[j] / w_norm;
        let col = &mut xm[j * n..(j + 1) * n];
        for (xv, pv) in col.iter_mut().zip(p.iter()) {
            *xv += c * a * pv;
        }
        for &i in &obs.observed {
            col[i] += c * b * (obs.y[i] - p[i]);
        }
    }

    let outcome = state.accept();
    if state.k % state.params.reorth_every == 0 {
        state.x = orthonormalize(&state.x)?;
    }
    Ok(outcome)
}
