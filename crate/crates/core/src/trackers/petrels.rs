use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{masked_least_squares, psd_inv_sqrt};
use crate::model::Observation;

use super::{SkipReason, StepOutcome, TrackerState};

const RESCALE_ABOVE: f64 = 18446744073709551616.0; // 2^64
const RESCALE_X: f64 = 1.0 / 4294967296.0; // 2^-32
const MAX_GRAM_CONDITION: f64 = 1e6;
const GAUGE_CHECK_EVERY: u64 = 32;

/// One step of simplified PETRELS (a single gain `R` shared by all rows).
///
/// Only observed rows of `X` move: `X ← X + Ω(y − Xŵ) ŵᵀR`. The gain follows
/// `R ← (γR⁻¹ + α ŵŵᵀ)⁻¹`, applied as a rank-one Woodbury update. On a
/// conditioning skip both `X` and `R` stay frozen.
pub fn petrels_step(state: &mut TrackerState, obs: &Observation) -> Result<StepOutcome> {
    let ls = masked_least_squares(&state.x, obs, state.params.eps);
    if !ls.ok {
        return Ok(state.skip(SkipReason::Conditioning));
    }
    let n = state.n();
    let d = state.d();
    let w = ls.w_hat;
    let gamma = 1.0 - state.params.mu / n as f64;
    let alpha = state.alpha;
    let r = state
        .r
        .as_ref()
        .ok_or_else(|| Error::Parameter("PETRELS state has no gain matrix".into()))?;

    // row update direction ŵᵀR
    let wr = r.tr_mul(&w);
    let xm = state.x.as_mut_slice();
    if d == 1 {
        let (w0, wr0) = (w[0], wr[0]);
        for &i in &obs.observed {
            xm[i] += (obs.y[i] - xm[i] * w0) * wr0;
        }
    } else {
        for &i in &obs.observed {
            let fit: f64 = (0..d).map(|j| xm[i + j * n] * w[j]).sum();
            let resid = obs.y[i] - fit;
            for j in 0..d {
                xm[i + j * n] += resid * wr[j];
            }
        }
    }

    let v = (r * &w) / gamma;
    let beta = 1.0 + alpha * w.dot(&v);
    if !(beta > 1e-14) {
        return Err(Error::Numeric(format!(
            "PETRELS beta = {beta:.3e}; the gain matrix is no longer positive definite"
        )));
    }
    let mut r_next = r / gamma - (&v * v.transpose()) * (alpha / beta);
    r_next = 0.5 * (&r_next + r_next.transpose());

    if state.params.check_invariants {
        let direct = woodbury_oracle(r, &w, gamma, alpha)?;
        let scale = direct.amax().max(f64::MIN_POSITIVE);
        let err = (&r_next - &direct).amax() / scale;
        if err > 1e-8 {
            return Err(Error::Numeric(format!(
                "Woodbury update drifted from the direct inverse (relative {err:.3e})"
            )));
        }
    }
    state.r = Some(r_next);
    if state.k % GAUGE_CHECK_EVERY == 0 {
        regauge(state)?;
    }
    Ok(state.accept())
}

/// `(X, R) → (XS, SᵀRS)` leaves every estimate unchanged for any invertible
/// `S`. Along a run `X` and `R` grow geometrically and, for `d > 1`, become
/// ill-conditioned, so pull them back before floating point gives out. `X`
/// is kept far above the conditioning floor of the least-squares guard.
fn regauge(state: &mut TrackerState) -> Result<()> {
    let r = state.r.as_mut().expect("PETRELS gain");
    if state.x.ncols() == 1 {
        // exact: a power of two changes no bits of the estimate
        if state.x.norm() > RESCALE_ABOVE {
            state.x *= RESCALE_X;
            *r *= RESCALE_X * RESCALE_X;
        }
        return Ok(());
    }
    let gram = state.x.tr_mul(&state.x);
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if hi <= RESCALE_ABOVE * RESCALE_ABOVE && hi <= MAX_GRAM_CONDITION * lo {
        return Ok(());
    }
    let s = psd_inv_sqrt(&gram)? / RESCALE_X;
    state.x = &state.x * &s;
    let rs = &*r * &s;
    let next = s.tr_mul(&rs);
    *r = 0.5 * (&next + next.transpose());
    Ok(())
}

/// `(γR⁻¹ + α ŵŵᵀ)⁻¹` by explicit inversion.
pub(crate) fn woodbury_oracle(
    r: &DMatrix<f64>,
    w: &nalgebra::DVector<f64>,
    gamma: f64,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("PETRELS gain".into()))?;
    (r_inv * gamma + (w * w.transpose()) * alpha)
        .try_inverse()
        .ok_or_else(|| Error::Singular("PETRELS updated precision".into()))
}
