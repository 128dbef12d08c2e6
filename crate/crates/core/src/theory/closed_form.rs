use nalgebra::DMatrix;

use super::{require_spd, OdeParams};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;

/// `z_ℓ(t) = a/κ · (1 − e^{−κt})` with `a = τ(2 + τσ²)αλ²` and
/// `κ = τ(2αλ² − τσ⁴)`, equal to `a t` when `κ = 0`.
///
/// The decaying exponent is the one that reproduces `dP/dt = A − PB − BP`
/// under RK4 (see the theory tests); a growing exponent makes `z` blow up in
/// exactly the regime where the steady state is informative.
pub fn z_entry(alpha_lambda2: f64, sigma: f64, tau: f64, t: f64) -> f64 {
    let s2 = sigma * sigma;
    let a = tau * (2.0 + tau * s2) * alpha_lambda2;
    let kappa = tau * (2.0 * alpha_lambda2 - tau * s2 * s2);
    if kappa == 0.0 {
        a * t
    } else {
        a * (-(-kappa * t).exp_m1() / kappa)
    }
}

/// `P(t) = e^{−tB} P(0) e^{−tB} + Z(t)` for constant `τ`.
pub fn oja_grouse_closed_form(p0: &DMatrix<f64>, params: &OdeParams, t: f64) -> Result<DMatrix<f64>> {
    let tau = params
        .tau
        .as_constant()
        .ok_or_else(|| Error::Parameter("the closed form needs a constant step size".into()))?;
    check_p0(p0, params)?;
    let s4 = params.sigma.powi(4);
    let al2 = params.alpha_lambda2();
    let decay: Vec<f64> = al2.iter().map(|l| (-t * tau * (l - tau / 2.0 * s4)).exp()).collect();
    let d = params.d();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let z = if i == j { z_entry(al2[i], params.sigma, tau, t) } else { 0.0 };
        decay[i] * p0[(i, j)] * decay[j] + z
    }))
}

/// General solution for a time-varying `τ(t)`:
///
/// ```text
/// P(t) = e^{−β(t)} P(0) e^{−β(t)} + ∫₀ᵗ e^{−(β(t)−β(s))} A(s) e^{−(β(t)−β(s))} ds,
/// β(t) = ∫₀ᵗ B(s) ds
/// ```
///
/// Both integrals use composite Simpson with `quad_steps` panels; `β` is
/// accumulated on the same grid.
pub fn oja_grouse_closed_form_general(
    p0: &DMatrix<f64>,
    params: &OdeParams,
    t: f64,
    quad_steps: usize,
) -> Result<DMatrix<f64>> {
    check_p0(p0, params)?;
    if quad_steps == 0 {
        return Err(Error::Parameter("quad_steps must be >= 1".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("t must be >= 0, got {t}")));
    }
    let d = params.d();
    let s2 = params.sigma * params.sigma;
    let al2 = params.alpha_lambda2();
    let m = 2 * quad_steps;
    let h = t / m as f64;
    let nodes: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
    let taus: Vec<f64> = nodes.iter().map(|&s| params.tau.at(s)).collect();

    let mut p = DMatrix::zeros(d, d);
    let mut beta_t = vec![0.0; d];
    let mut conv = vec![0.0; d];
    for l in 0..d {
        let b: Vec<f64> = taus.iter().map(|&tau| tau * (al2[l] - tau / 2.0 * s2 * s2)).collect();
        let beta = cumulative_simpson(&b, h);
        beta_t[l] = beta[m];
        let integrand: Vec<f64> = (0..=m)
            .map(|i| {
                let a = taus[i] * (2.0 + taus[i] * s2) * al2[l];
                (-2.0 * (beta[m] - beta[i])).exp() * a
            })
            .collect();
        conv[l] = simpson(&integrand, h);
    }
    for i in 0..d {
        for j in 0..d {
            p[(i, j)] = (-beta_t[i] - beta_t[j]).exp() * p0[(i, j)] + if i == j { conv[i] } else { 0.0 };
        }
    }
    Ok(p)
}

fn check_p0(p0: &DMatrix<f64>, params: &OdeParams) -> Result<()> {
    let d = params.d();
    if p0.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "P0 is {}x{}, expected {d}x{d}",
            p0.nrows(),
            p0.ncols()
        )));
    }
    require_spd(p0, "P0")
}

/// Composite Simpson over an even number of equal intervals.
fn simpson(f: &[f64], h: f64) -> f64 {
    let m = f.len() - 1;
    debug_assert!(m % 2 == 0);
    let mut s = f[0] + f[m];
    for (i, v) in f.iter().enumerate().take(m).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Running integral at every node: Simpson on full panels, and the
/// quadratic-exact half-panel rule `h/12 (5f₀ + 8f₁ − f₂)` at odd nodes.
fn cumulative_simpson(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len() - 1;
    let mut out = vec![0.0; m + 1];
    let mut k = 0;
    while k + 2 <= m {
        out[k + 1] = out[k] + h / 12.0 * (5.0 * f[k] + 8.0 * f[k + 1] - f[k + 2]);
        out[k + 2] = out[k] + h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
        k += 2;
    }
    out
}

/// `P(0) = [Q(0) Q(0)ᵀ]⁻¹`; fails when `Q(0)` is singular.
pub fn inverse_gram_from_cosine(q0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = q0 * q0.transpose();
    let p = gram
        .try_inverse()
        .ok_or_else(|| Error::Singular("Q(0) must be invertible".into()))?;
    let p = 0.5 * (&p + p.transpose());
    require_spd(&p, "[Q Qᵀ]⁻¹")?;
    Ok(p)
}

/// Eigenvalues of `P⁻¹`, i.e. the squared cosines, sorted descending.
pub fn squared_cosines_from_inverse_gram(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (vals, _) = sym_eigen(&(0.5 * (p + p.transpose())));
    if vals.first().is_some_and(|&v| !(v > 0.0)) {
        return Err(Error::Singular("P is not positive definite".into()));
    }
    // ascending eigenvalues of P give descending eigenvalues of P⁻¹
    Ok(vals.iter().map(|v| 1.0 / v).collect())
}
