//! Small dense numerics shared by the trackers and the theory side.
//!
//! Everything here works on `n × d` tall matrices with `d` small (a handful
//! of columns), so factorizations are always done on `d × d` Gram matrices
//! and the `n`-length passes stay `O(n d²)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::Observation;

/// Eigenvalue floor below which a PSD matrix is treated as singular.
pub const PSD_FLOOR: f64 = 1e-12;

/// Singular values may exceed one by roundoff; beyond this it is an error.
pub const COSINE_CLAMP_TOL: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-10;

/// Cosine similarity matrix `Q = Uᵀ X (XᵀX)^{-1/2}` and its singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSimilarity {
    pub q: DMatrix<f64>,
    /// Principal-angle cosines, sorted descending, clamped to `[0, 1]`.
    pub cosines: Vec<f64>,
}

/// Result of the masked least-squares coefficient solve.
#[derive(Debug, Clone)]
pub struct MaskedLeastSquares {
    /// `(XᵀΩX)^{-1} XᵀΩy`; zeros when `ok` is false.
    pub w_hat: DVector<f64>,
    /// Smallest eigenvalue of `XᵀΩX`.
    pub lambda_min: f64,
    /// False when the conditioning guard rejected the sample.
    pub ok: bool,
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric eigendecomposition with eigenvalues in ascending order.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => f64::INFINITY,
        1 => m[(0, 0)],
        2 => {
            let (a, b, c) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
            let mean = 0.5 * (a + c);
            let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            mean - radius
        }
        _ => SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
    }
}

fn inv_sqrt_with_floor(m: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    if max_asymmetry(m) > SYMMETRY_TOL * scale {
        return Err(Error::Parameter(format!(
            "matrix is not symmetric (asymmetry {:.3e})",
            max_asymmetry(m)
        )));
    }
    let sym = 0.5 * (m + m.transpose());
    let (values, vectors) = sym_eigen(&sym);
    if let Some(&smallest) = values.first() {
        if !(smallest > floor) {
            return Err(Error::Singular(format!(
                "smallest eigenvalue {smallest:.3e} is not above {floor:.1e}"
            )));
        }
    }
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for (k, &mu) in values.iter().enumerate() {
        let s = 1.0 / mu.sqrt();
        let v = vectors.column(k);
        for j in 0..d {
            for i in 0..d {
                out[(i, j)] += s * v[i] * v[j];
            }
        }
    }
    Ok(out)
}

/// Principal inverse square root `V diag(μ^{-1/2}) Vᵀ` of a symmetric PD matrix.
pub fn psd_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    inv_sqrt_with_floor(m, PSD_FLOOR)
}

/// Symmetric orthogonalization `X (XᵀX)^{-1/2}`.
///
/// This is the principal-square-root normalization, not a QR factor: the
/// result is the orthonormal matrix closest to `X` with the same column span.
pub fn orthonormalize(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = x.tr_mul(x);
    // smallest singular value > 1e-12  <=>  smallest Gram eigenvalue > 1e-24
    let s = inv_sqrt_with_floor(&gram, 1e-24)
        .map_err(|e| Error::Singular(format!("orthonormalize: {e}")))?;
    Ok(x * s)
}

/// Solve `min_w ‖y − ΩXw‖²` touching only the observed rows.
///
/// When `λ_min(XᵀΩX) ≤ eps` the sample is rejected (`ok = false`); that is a
/// defined outcome rather than an error.
pub fn masked_least_squares(x: &DMatrix<f64>, obs: &Observation, eps: f64) -> MaskedLeastSquares {
    let n = x.nrows();
    let d = x.ncols();
    let data = x.as_slice();
    if d == 1 {
        let (mut zz, mut bb) = (0.0, 0.0);
        for &i in &obs.observed {
            zz += data[i] * data[i];
            bb += data[i] * obs.y[i];
        }
        let ok = zz > eps;
        return MaskedLeastSquares {
            w_hat: DVector::from_element(1, if ok { bb / zz } else { 0.0 }),
            lambda_min: zz,
            ok,
        };
    }
    let mut z = DMatrix::<f64>::zeros(d, d);
    let mut b = DVector::<f64>::zeros(d);
    for &i in &obs.observed {
        let yi = obs.y[i];
        for a in 0..d {
            let xa = data[i + a * n];
            b[a] += xa * yi;
            for c in a..d {
                z[(a, c)] += xa * data[i + c * n];
            }
        }
    }
    for a in 0..d {
        for c in 0..a {
            z[(a, c)] = z[(c, a)];
        }
    }
    let lmin = lambda_min(&z);
    if !(lmin > eps) {
        return MaskedLeastSquares {
            w_hat: DVector::zeros(d),
            lambda_min: lmin,
            ok: false,
        };
    }
    let w_hat = match z.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => {
            return MaskedLeastSquares {
                w_hat: DVector::zeros(d),
                lambda_min: lmin,
                ok: false,
            }
        }
    };
    MaskedLeastSquares {
        w_hat,
        lambda_min: lmin,
        ok: true,
    }
}

/// Singular values of a small matrix, sorted descending.
pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        return vec![m[(0, 0)].abs()];
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `Q = Uᵀ X (XᵀX)^{-1/2}` and the principal-angle cosines between `U` and `X`.
pub fn cosine_similarity(u: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<CosineSimilarity> {
    if u.shape() != x.shape() {
        return Err(Error::Dimension(format!(
            "U is {:?} but X is {:?}",
            u.shape(),
            x.shape()
        )));
    }
    let gram = x.tr_mul(x);
    let s = inv_sqrt_with_floor(&gram, 1e-24)
        .map_err(|e| Error::Singular(format!("cosine_similarity: {e}")))?;
    let q = u.tr_mul(x) * s;
    let cosines = clamp_cosines(singular_values_desc(&q))?;
    Ok(CosineSimilarity { q, cosines })
}

pub(crate) fn clamp_cosines(values: Vec<f64>) -> Result<Vec<f64>> {
    values
        .into_iter()
        .map(|c| {
            if c > 1.0 + COSINE_CLAMP_TOL || !c.is_finite() {
                Err(Error::Numeric(format!("cosine {c} exceeds 1")))
            } else {
                Ok(c.clamp(0.0, 1.0))
            }
        })
        .collect()
}

/// Largest absolute entry of `XᵀX − I`.
pub fn orthonormality_defect(x: &DMatrix<f64>) -> f64 {
    let gram = x.tr_mul(x);
    let d = gram.nrows();
    (gram - DMatrix::identity(d, d)).amax()
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values_desc(m).first().copied().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs_from(y: &[f64], mask: &[bool]) -> Observation {
        Observation::from_parts(y.to_vec(), mask.to_vec(), 0).unwrap()
    }

    fn padded(top: DMatrix<f64>, n: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, top.ncols());
        out.view_mut((0, 0), top.shape()).copy_from(&top);
        out
    }

    #[test]
    fn orthonormal_input_is_unchanged() {
        let x = padded(DMatrix::identity(3, 3), 5);
        let out = orthonormalize(&x).unwrap();
        assert!((out - x).amax() < 1e-12);
    }

    #[test]
    fn scaling_is_removed() {
        let x = padded(DMatrix::identity(3, 3) * 2.0, 5);
        let out = orthonormalize(&x).unwrap();
        assert!((out - padded(DMatrix::identity(3, 3), 5)).amax() < 1e-12);
    }

    #[test]
    fn skewed_columns_keep_their_span() {
        let top = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let x = padded(top, 4);
        let out = orthonormalize(&x).unwrap();
        assert!(orthonormality_defect(&out) < 1e-12);

        // oracle: (XᵀX)^{-1/2} for XᵀX = [[1,1],[1,2]] via its 2x2 eigensystem
        let tr: f64 = 3.0;
        let disc = (tr * tr - 4.0).sqrt();
        let (l1, l2) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
        let v1 = nalgebra::Vector2::new(1.0, l1 - 1.0).normalize();
        let v2 = nalgebra::Vector2::new(1.0, l2 - 1.0).normalize();
        let s = v1 * v1.transpose() / l1.sqrt() + v2 * v2.transpose() / l2.sqrt();
        let s = DMatrix::from_iterator(2, 2, s.iter().copied());
        let expected = &x * s;
        assert!((&out - expected).amax() < 1e-12);

        // equal projectors <=> equal column spans
        let p_in = &x * x.tr_mul(&x).try_inverse().unwrap() * x.transpose();
        let p_out = &out * out.transpose();
        assert!((p_in - p_out).amax() < 1e-12);
    }

    #[test]
    fn rank_deficient_input_is_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(orthonormalize(&x), Err(Error::Singular(_))));
    }

    #[test]
    fn inv_sqrt_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((psd_inv_sqrt(&id).unwrap() - &id).amax() < 1e-15);

        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let r = psd_inv_sqrt(&diag).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0 / 3.0]));
        assert!((r - expected).amax() < 1e-15);

        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = psd_inv_sqrt(&m).unwrap();
        // eigenvalues 3 (v = (1,1)/√2) and 1 (v = (1,−1)/√2)
        let a = 0.5 * (1.0 / 3f64.sqrt() + 1.0);
        let b = 0.5 * (1.0 / 3f64.sqrt() - 1.0);
        let expected = DMatrix::from_row_slice(2, 2, &[a, b, b, a]);
        assert!((&r - expected).amax() < 1e-12);
        assert!((&r * &m * &r - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn inv_sqrt_rejects_singular_and_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(psd_inv_sqrt(&m), Err(Error::Singular(_))));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(psd_inv_sqrt(&m), Err(Error::Parameter(_))));
    }

    #[test]
    fn full_mask_least_squares_is_projection() {
        let x = orthonormalize(&DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.2, 0.3, 1.0, -0.5, 0.1, 0.2, 0.7],
        ))
        .unwrap();
        let y = [0.3, -1.0, 2.0, 0.5];
        let obs = obs_from(&y, &[true; 4]);
        let ls = masked_least_squares(&x, &obs, 0.25);
        assert!(ls.ok);
        let expected = x.tr_mul(&DVector::from_row_slice(&y));
        assert!((ls.w_hat - expected).amax() < 1e-12);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let x = padded(DMatrix::identity(2, 2), 5);
        let obs = obs_from(&[0.0; 5], &[false; 5]);
        let ls = masked_least_squares(&x, &obs, 0.25);
        assert!(!ls.ok);
        assert_eq!(ls.lambda_min, 0.0);
    }

    #[test]
    fn masked_least_squares_matches_normal_equations() {
        let x = DMatrix::from_row_slice(
            6,
            2,
            &[0.5, 0.1, -0.3, 0.4, 0.2, 0.6, 0.7, -0.2, -0.1, 0.3, 0.4, 0.5],
        );
        let mask = [true, false, true, true, false, true];
        let y = [1.0, 0.0, -0.5, 2.0, 0.0, 0.25];
        let obs = obs_from(&y, &mask);

        // brute-force 2x2 normal equations on the observed rows
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..6 {
            if mask[i] {
                let (p, q) = (x[(i, 0)], x[(i, 1)]);
                a11 += p * p;
                a12 += p * q;
                a22 += q * q;
                b1 += p * y[i];
                b2 += q * y[i];
            }
        }
        let det = a11 * a22 - a12 * a12;
        let w1 = (a22 * b1 - a12 * b2) / det;
        let w2 = (a11 * b2 - a12 * b1) / det;

        let ls = masked_least_squares(&x, &obs, 1e-3);
        assert!(ls.ok);
        assert!((ls.w_hat[0] - w1).abs() < 1e-12);
        assert!((ls.w_hat[1] - w2).abs() < 1e-12);
    }

    #[test]
    fn cosine_similarity_examples() {
        let u = padded(DMatrix::identity(2, 2), 4);
        let same = cosine_similarity(&u, &u).unwrap();
        assert!((same.q.clone() - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert_eq!(same.cosines, vec![1.0, 1.0]);

        let mut perp = DMatrix::zeros(4, 2);
        perp[(2, 0)] = 1.0;
        perp[(3, 1)] = 1.0;
        let orth = cosine_similarity(&u, &perp).unwrap();
        assert!(orth.q.amax() < 1e-15);
        assert_eq!(orth.cosines, vec![0.0, 0.0]);

        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let diag = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]) / 2f64.sqrt();
        let c = cosine_similarity(&e1, &diag).unwrap();
        assert!((c.cosines[0] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    fn tall_matrix(n: usize, d: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-1.0f64..1.0, n * d)
            .prop_map(move |v| DMatrix::from_vec(n, d, v))
            .prop_filter("well conditioned", |m| {
                let sv = singular_values_desc(m);
                sv[sv.len() - 1] > 1e-2
            })
    }

    proptest! {
        #[test]
        fn orthonormalize_is_idempotent(x in tall_matrix(9, 3)) {
            let once = orthonormalize(&x).unwrap();
            let twice = orthonormalize(&once).unwrap();
            prop_assert!((once - twice).amax() < 1e-10);
        }

        #[test]
        fn cosines_ignore_right_factors(
            x in tall_matrix(10, 3),
            u in tall_matrix(10, 3),
            right in tall_matrix(3, 3),
        ) {
            let u = orthonormalize(&u).unwrap();
            let a = cosine_similarity(&u, &x).unwrap();
            let b = cosine_similarity(&u, &(&x * right)).unwrap();
            for (p, q) in a.cosines.iter().zip(&b.cosines) {
                prop_assert!((p - q).abs() < 1e-8);
            }
        }

        #[test]
        fn inv_sqrt_whitens(
            seed in tall_matrix(4, 4),
            log_cond in 0.0f64..6.0,
        ) {
            // PSD with prescribed spectrum spread up to 1e6
            let v = orthonormalize(&seed).unwrap();
            let spectrum: Vec<f64> = (0..4).map(|i| 10f64.powf(-log_cond * i as f64 / 3.0)).collect();
            let m = &v * DMatrix::from_diagonal(&DVector::from_vec(spectrum)) * v.transpose();
            let m = 0.5 * (&m + m.transpose());
            let r = psd_inv_sqrt(&m).unwrap();
            prop_assert!((&r * &m * &r - DMatrix::identity(4, 4)).amax() < 1e-8);
        }

        #[test]
        fn masked_residual_is_orthogonal_to_observed_columns(
            x in tall_matrix(12, 2),
            y in proptest::collection::vec(-3.0f64..3.0, 12),
            mask in proptest::collection::vec(proptest::bool::weighted(0.7), 12),
        ) {
            let y: Vec<f64> = y.iter().zip(&mask).map(|(v, &m)| if m { *v } else { 0.0 }).collect();
            let obs = obs_from(&y, &mask);
            let ls = masked_least_squares(&x, &obs, 1e-6);
            if ls.ok {
                for c in 0..2 {
                    let mut dot = 0.0;
                    for &i in &obs.observed {
                        let fit: f64 = (0..2).map(|j| x[(i, j)] * ls.w_hat[j]).sum();
                        dot += x[(i, c)] * (y[i] - fit);
                    }
                    prop_assert!(dot.abs() < 1e-8);
                }
            }
        }
    }
}
