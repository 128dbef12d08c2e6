use super::OdeParams;
use crate::error::{Error, Result};

/// Limiting `cos²` of one direction for Oja/GROUSE with constant `τ`:
/// `max{0, (2αλ² − τσ⁴) / (αλ²(2 + τσ²))}`.
pub fn steady_state_cos2(lambda: f64, params: &OdeParams) -> Result<f64> {
    let tau = params
        .tau
        .as_constant()
        .ok_or_else(|| Error::Parameter("steady state needs a constant step size".into()))?;
    let al2 = params.alpha * lambda * lambda;
    if al2 == 0.0 {
        return Ok(0.0);
    }
    let s2 = params.sigma * params.sigma;
    Ok(((2.0 * al2 - tau * s2 * s2) / (al2 * (2.0 + tau * s2))).clamp(0.0, 1.0))
}

/// `(2α/σ⁴) min λ²`: every direction is informative iff `τ` is strictly below this.
pub fn oja_grouse_critical_tau(params: &OdeParams) -> f64 {
    let min_al2 = params.alpha_lambda2().into_iter().fold(f64::INFINITY, f64::min);
    2.0 * min_al2 / params.sigma.powi(4)
}

/// `(2s + 1/2)² − 1/4` for the signal-to-noise ratio `s = αλ²/σ²`.
pub fn petrels_critical_mu_for_snr(snr: f64) -> f64 {
    (2.0 * snr + 0.5).powi(2) - 0.25
}

/// PETRELS is informative iff `μ` is strictly below this (`d = 1` only).
pub fn petrels_critical_mu(params: &OdeParams) -> Result<f64> {
    let al2 = single_direction(params)?;
    Ok(petrels_critical_mu_for_snr(al2 / (params.sigma * params.sigma)))
}

fn single_direction(params: &OdeParams) -> Result<f64> {
    if params.d() != 1 {
        return Err(Error::UnsupportedDimension(params.d()));
    }
    Ok(params.alpha_lambda2()[0])
}

/// Right-hand side of the `d = 1` PETRELS system in `(Q², G)`:
///
/// ```text
/// dQ²/dt = 2GQ² [αλ² − σ⁴G/2 − Q²(1 + σ²G/2) αλ²]
/// dG/dt  = G [μ − G(σ²G + 1)(Q²αλ² + σ²)]
/// ```
pub fn rhs_q2_g(q2: f64, g: f64, params: &OdeParams) -> Result<(f64, f64)> {
    let al2 = single_direction(params)?;
    let s2 = params.sigma * params.sigma;
    let dq2 = 2.0 * g * q2 * (al2 - s2 * s2 * g / 2.0 - q2 * (1.0 + s2 * g / 2.0) * al2);
    let dg = g * (params.mu - g * (s2 * g + 1.0) * (q2 * al2 + s2));
    Ok((dq2, dg))
}

/// Nontrivial `dQ²/dt = 0` nullcline: `Q² = (αλ² − σ⁴G/2) / ((1 + σ²G/2) αλ²)`.
pub fn nullcline_f(g: f64, params: &OdeParams) -> Result<f64> {
    let al2 = single_direction(params)?;
    let s2 = params.sigma * params.sigma;
    Ok((al2 - s2 * s2 * g / 2.0) / ((1.0 + s2 * g / 2.0) * al2))
}

/// Nontrivial `dG/dt = 0` nullcline: `Q² = (μ/(G(σ²G + 1)) − σ²) / (αλ²)`.
pub fn nullcline_h(g: f64, params: &OdeParams) -> Result<f64> {
    let al2 = single_direction(params)?;
    let s2 = params.sigma * params.sigma;
    Ok((params.mu / (g * (s2 * g + 1.0)) - s2) / al2)
}

/// Stable fixed point of the `d = 1` PETRELS system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedPoint {
    Informative { q2: f64, g: f64 },
    Uninformative { g: f64 },
}

impl FixedPoint {
    pub fn q2(&self) -> f64 {
        match *self {
            FixedPoint::Informative { q2, .. } => q2,
            FixedPoint::Uninformative { .. } => 0.0,
        }
    }

    pub fn g(&self) -> f64 {
        match *self {
            FixedPoint::Informative { g, .. } | FixedPoint::Uninformative { g } => g,
        }
    }
}

const G_LO: f64 = 1e-12;
const G_HI: f64 = 1e6;

/// Intersection of the two nullclines when `μ` is below the critical value,
/// otherwise the root of `σ²G(σ²G + 1) = μ` on the `Q = 0` axis.
pub fn petrels_fixed_point(params: &OdeParams) -> Result<FixedPoint> {
    let al2 = single_direction(params)?;
    if !(params.mu > 0.0) {
        return Err(Error::Parameter(format!("mu must be > 0, got {}", params.mu)));
    }
    let s2 = params.sigma * params.sigma;
    let mu = params.mu;
    if mu < petrels_critical_mu(params)? {
        // f decreases from 1 to 0 on (0, G₀]; h decreases from +∞ and is
        // negative at G₀ exactly when μ is subcritical
        let g0 = if s2 > 0.0 { (2.0 * al2 / (s2 * s2)).min(G_HI) } else { G_HI };
        let phi = |g: f64| {
            let f = (al2 - s2 * s2 * g / 2.0) / ((1.0 + s2 * g / 2.0) * al2);
            let h = (mu / (g * (s2 * g + 1.0)) - s2) / al2;
            f - h
        };
        let g = bisect(phi, G_LO, g0, 1e-12)?;
        let q2 = nullcline_f(g, params)?.clamp(0.0, 1.0);
        Ok(FixedPoint::Informative { q2, g })
    } else {
        let g = bisect(|g| mu - s2 * g * (s2 * g + 1.0), G_LO, G_HI, 1e-12)?;
        Ok(FixedPoint::Uninformative { g })
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`, stopping once
/// `|f| ≤ ftol` or the bracket cannot shrink further.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, ftol: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return Err(Error::Solver(format!(
            "no sign change on [{lo:e}, {hi:e}] (f = {flo:e}, {fhi:e})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm.abs() <= ftol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
