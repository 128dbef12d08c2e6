use nalgebra::DMatrix;

use super::OdeParams;
use crate::error::{Error, Result};
use crate::linalg::lambda_min;

/// `F(Q, G) = [αΛ²Q − (σ⁴/2) QG − Q (I + (σ²/2) G) Qᵀ αΛ² Q] G`.
pub fn rhs_f(q: &DMatrix<f64>, g: &DMatrix<f64>, p: &OdeParams) -> DMatrix<f64> {
    let d = q.nrows();
    let l = p.alpha_lambda2_matrix();
    let s2 = p.sigma * p.sigma;
    let s4 = s2 * s2;
    let id = DMatrix::<f64>::identity(d, d);
    let inner = &l * q - (q * g) * (s4 / 2.0) - q * (id + g * (s2 / 2.0)) * q.transpose() * &l * q;
    inner * g
}

/// `H(Q, G) = G [μ I − G (σ²G + I)(Qᵀ αΛ² Q + σ² I)]`.
pub fn rhs_h(q: &DMatrix<f64>, g: &DMatrix<f64>, p: &OdeParams) -> DMatrix<f64> {
    let d = q.nrows();
    let l = p.alpha_lambda2_matrix();
    let s2 = p.sigma * p.sigma;
    let id = DMatrix::<f64>::identity(d, d);
    let signal = q.transpose() * &l * q + &id * s2;
    g * (&id * p.mu - g * (g * s2 + &id) * signal)
}

fn checked_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = 0.5 * (m + m.transpose());
    let lmin = lambda_min(&sym);
    if !(lmin > 1e-12) {
        return Err(Error::Singular(format!(
            "{what} has smallest eigenvalue {lmin:.3e}"
        )));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{what} is not invertible")))
}

/// `(J1, J2, J3)`, the right-hand side of the full PETRELS system:
///
/// ```text
/// C  = Kᵀ αΛ² K + σ² W
/// J1 = W⁻¹ C W⁻¹ − μ A
/// J2 = (αΛ² + σ² I) K W⁻¹ A⁻¹ − K W⁻¹ C W⁻¹ A⁻¹
/// J3 = σ² A⁻¹ W⁻¹ C W⁻¹ A⁻¹
/// ```
pub fn rhs_petrels_full(
    a: &DMatrix<f64>,
    k: &DMatrix<f64>,
    w: &DMatrix<f64>,
    p: &OdeParams,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let d = k.nrows();
    let l = p.alpha_lambda2_matrix();
    let s2 = p.sigma * p.sigma;
    let id = DMatrix::<f64>::identity(d, d);
    let a_inv = checked_inverse(a, "A")?;
    let w_inv = checked_inverse(w, "W")?;
    let c = k.transpose() * &l * k + w * s2;
    let wcw = &w_inv * &c * &w_inv;
    let j1 = &wcw - a * p.mu;
    let j2 = (&l + &id * s2) * k * &w_inv * &a_inv - k * &wcw * &a_inv;
    let j3 = &a_inv * &wcw * &a_inv * s2;
    Ok((j1, j2, j3))
}

/// `dP/dt = A(t) − P B(t) − B(t) P` for `P = (QQᵀ)⁻¹`, with the diagonal
/// `A = τ(2 + τσ²) αΛ²` and `B = τ(αΛ² − (τ/2) σ⁴ I)`.
pub fn rhs_inverse_gram(pm: &DMatrix<f64>, t: f64, p: &OdeParams) -> DMatrix<f64> {
    let tau = p.tau.at(t);
    let s2 = p.sigma * p.sigma;
    let al2 = p.alpha_lambda2();
    let d = pm.nrows();
    DMatrix::from_fn(d, d, |i, j| {
        let bi = tau * (al2[i] - tau / 2.0 * s2 * s2);
        let bj = tau * (al2[j] - tau / 2.0 * s2 * s2);
        let drive = if i == j { tau * (2.0 + tau * s2) * al2[i] } else { 0.0 };
        drive - pm[(i, j)] * (bi + bj)
    })
}
