//! Ground-truth subspace, partially observed sample stream and initial guesses.
//!
//! A sample is `s = U c + a` with `c ~ N(0, Λ²)` and `a ~ N(0, σ² I)`. Each
//! coordinate is observed independently with probability `α`; unobserved
//! entries are stored as explicit zeros next to a boolean mask.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::orthonormalize;

/// Random source used for every trial.
pub type TrialRng = Xoshiro256PlusPlus;

/// Independent stream for trial `trial` under `master_seed`.
///
/// The state is drawn from ChaCha8 stream `trial` under key `master_seed`, so
/// trials can run in any order or concurrently and still reproduce bit for
/// bit. The per-sample draws then come from the much cheaper xoshiro core.
pub fn trial_rng(master_seed: u64, trial: u64) -> TrialRng {
    let mut key = ChaCha8Rng::seed_from_u64(master_seed);
    key.set_stream(trial);
    Xoshiro256PlusPlus::from_rng(&mut key)
}

/// Ground-truth parameters of the observation model.
#[derive(Debug, Clone)]
pub struct SubspaceModel {
    pub n: usize,
    pub d: usize,
    /// `n × d`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Per-direction signal strength `λ₁ ≥ … ≥ λ_d`.
    pub lambdas: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
}

/// Validate scalar model parameters without a basis attached.
pub fn validate_params(n: usize, d: usize, lambdas: &[f64], sigma: f64, alpha: f64) -> Result<()> {
    if d == 0 || d > n {
        return Err(Error::Dimension(format!("need 1 <= d <= n, got n={n}, d={d}")));
    }
    if lambdas.len() != d {
        return Err(Error::Dimension(format!(
            "expected {d} lambdas, got {}",
            lambdas.len()
        )));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Parameter("lambdas must be finite and non-negative".into()));
    }
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Parameter("lambdas must be non-increasing".into()));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Parameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

impl SubspaceModel {
    /// Wrap an existing basis. `u` must be orthonormal to 1e-10.
    pub fn new(u: DMatrix<f64>, lambdas: Vec<f64>, sigma: f64, alpha: f64) -> Result<Self> {
        let (n, d) = u.shape();
        validate_params(n, d, &lambdas, sigma, alpha)?;
        let defect = crate::linalg::orthonormality_defect(&u);
        if defect > 1e-10 {
            return Err(Error::Parameter(format!(
                "basis is not orthonormal (max |UᵀU − I| = {defect:.3e})"
            )));
        }
        Ok(Self {
            n,
            d,
            u,
            lambdas,
            sigma,
            alpha,
        })
    }

    /// Draw a uniformly random subspace and wrap it.
    pub fn random(
        n: usize,
        d: usize,
        lambdas: Vec<f64>,
        sigma: f64,
        alpha: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        validate_params(n, d, &lambdas, sigma, alpha)?;
        let u = generate_subspace(n, d, rng)?;
        Self::new(u, lambdas, sigma, alpha)
    }

    /// A coordinate is observed when a uniform `u32` falls below this.
    fn mask_threshold(&self) -> u64 {
        (self.alpha * 4_294_967_296.0).round() as u64
    }
}

/// One partially observed sample `y = Ω s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Length `n`; zero wherever `mask` is false.
    pub y: Vec<f64>,
    /// Diagonal of `Ω`.
    pub mask: Vec<bool>,
    /// Indices where `mask` is true, ascending.
    pub observed: Vec<usize>,
    pub k: u64,
}

impl Observation {
    pub fn empty(n: usize) -> Self {
        Self {
            y: vec![0.0; n],
            mask: vec![false; n],
            observed: Vec::with_capacity(n),
            k: 0,
        }
    }

    pub fn from_parts(y: Vec<f64>, mask: Vec<bool>, k: u64) -> Result<Self> {
        if y.len() != mask.len() {
            return Err(Error::Dimension(format!(
                "y has {} entries but mask has {}",
                y.len(),
                mask.len()
            )));
        }
        if y.iter().zip(&mask).any(|(v, m)| !m && *v != 0.0) {
            return Err(Error::Parameter("unobserved entries of y must be zero".into()));
        }
        let observed = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect();
        Ok(Self {
            y,
            mask,
            observed,
            k,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Uniformly random `n × d` orthonormal basis: `X (XᵀX)^{-1/2}` with Gaussian `X`.
pub fn generate_subspace(n: usize, d: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    if d == 0 || d > n {
        return Err(Error::Dimension(format!("need 1 <= d <= n, got n={n}, d={d}")));
    }
    let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    orthonormalize(&x)
}

/// Draw sample `k` into `out`, reusing its buffers.
///
/// Draw order per step: the `d` coefficients, then one `u64` per pair of
/// coordinates whose low and high halves decide the two mask bits
/// (`u32 < α·2³²`), then one noise value per observed coordinate in
/// ascending order.
pub fn sample_observation_into(
    model: &SubspaceModel,
    k: u64,
    rng: &mut impl Rng,
    out: &mut Observation,
) {
    let n = model.n;
    let d = model.d;
    let mut coef = [0.0f64; 16];
    let mut coef_vec;
    let c: &mut [f64] = if d <= coef.len() {
        &mut coef[..d]
    } else {
        coef_vec = vec![0.0; d];
        &mut coef_vec
    };
    for (cl, lam) in c.iter_mut().zip(&model.lambdas) {
        *cl = lam * rng.sample::<f64, _>(StandardNormal);
    }

    out.k = k;
    out.y.clear();
    out.y.resize(n, 0.0);
    out.mask.clear();
    out.mask.resize(n, false);

    // branch-free compaction: the mask is a coin flip per coordinate, so a
    // data-dependent branch here mispredicts about half the time
    let thr = model.mask_threshold();
    out.observed.clear();
    out.observed.resize(n, 0);
    let mut count = 0;
    let mut i = 0;
    while i < n {
        let w = rng.next_u64();
        out.observed[count] = i;
        count += usize::from((w & 0xffff_ffff) < thr);
        if i + 1 < n {
            out.observed[count] = i + 1;
            count += usize::from((w >> 32) < thr);
        }
        i += 2;
    }
    out.observed.truncate(count);

    let u = model.u.as_slice();
    let sigma = model.sigma;
    for &i in &out.observed {
        let mut s = 0.0;
        for (l, cl) in c.iter().enumerate() {
            s += u[i + l * n] * cl;
        }
        let noise: f64 = rng.sample(StandardNormal);
        out.y[i] = s + sigma * noise;
        out.mask[i] = true;
    }
}

/// Draw the `k`-th partially observed sample.
pub fn sample_observation(model: &SubspaceModel, k: u64, rng: &mut impl Rng) -> Observation {
    let mut obs = Observation::empty(model.n);
    sample_observation_into(model, k, rng, &mut obs);
    obs
}

/// Orthonormal initial estimate whose principal cosines with `u` concentrate at `q0`.
///
/// Built as `orthonormalize(q0·U + √(1−q0²)·G⊥)` where `G⊥` is Gaussian, has
/// its component in span(U) removed, and unit-norm columns. Any construction
/// with a deterministic limiting `UᵀX₀` would do; this one gives `≈ q0·I`.
pub fn correlated_init(u: &DMatrix<f64>, q0: f64, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    correlated_init_diag(u, &vec![q0; u.ncols()], rng)
}

/// Like [`correlated_init`] with one target cosine per direction, so that
/// `UᵀX₀ ≈ diag(q0)` for large `n`.
pub fn correlated_init_diag(u: &DMatrix<f64>, q0: &[f64], rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    let (n, d) = u.shape();
    if q0.len() != d {
        return Err(Error::Dimension(format!("{} initial cosines for d = {d}", q0.len())));
    }
    if let Some(bad) = q0.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
        return Err(Error::Parameter(format!("q0 must lie in (0, 1], got {bad}")));
    }
    let g = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut g_perp = &g - u * u.tr_mul(&g);
    for (j, mut col) in g_perp.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm > 0.0 {
            col *= (1.0 - q0[j] * q0[j]).max(0.0).sqrt() / norm;
        }
    }
    let mut x = g_perp;
    for j in 0..d {
        x.column_mut(j).axpy(q0[j], &u.column(j), 1.0);
    }
    orthonormalize(&x)
}

/// `Σ_{i,j} M_{ij}⁴`; `O(d²/n)` for a generic (incoherent) basis.
pub fn incoherence_statistic(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.powi(4)).sum()
}

const SUBSPACE_MAGIC: &[u8; 4] = b"SUBF";

/// Write `u` as `SUBF`, u32 n, u32 d, u32 reserved, then row-major LE f64.
pub fn write_subspace(path: &Path, u: &DMatrix<f64>) -> Result<()> {
    let (n, d) = u.shape();
    let to_u32 = |v: usize| {
        u32::try_from(v).map_err(|_| Error::Dimension(format!("{v} does not fit in u32")))
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = [0u8; 16];
    header[..4].copy_from_slice(SUBSPACE_MAGIC);
    header[4..8].copy_from_slice(&to_u32(n)?.to_le_bytes());
    header[8..12].copy_from_slice(&to_u32(d)?.to_le_bytes());
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(&mut w, &header)?;
    for i in 0..n {
        for j in 0..d {
            write(&mut w, &u[(i, j)].to_le_bytes())?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a matrix written by [`write_subspace`].
pub fn read_subspace(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(|e| Error::io(path, e))?;
    if &header[..4] != SUBSPACE_MAGIC {
        return Err(Error::Parameter(format!("{}: bad magic", path.display())));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != n * d * 8 {
        return Err(Error::Dimension(format!(
            "{}: expected {} payload bytes for {n}x{d}, found {}",
            path.display(),
            n * d * 8,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DMatrix::from_row_slice(n, d, &values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cosine_similarity, orthonormality_defect};

    #[test]
    fn scalar_subspace_is_a_sign() {
        for seed in 0..5 {
            let u = generate_subspace(1, 1, &mut trial_rng(seed, 0)).unwrap();
            assert!((u[(0, 0)].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn full_rank_subspace_is_orthogonal() {
        let u = generate_subspace(4, 4, &mut trial_rng(3, 1)).unwrap();
        assert!((&u * u.transpose() - DMatrix::identity(4, 4)).amax() < 1e-10);
    }

    #[test]
    fn random_subspace_is_incoherent() {
        let n = 20_000;
        let u = generate_subspace(n, 4, &mut trial_rng(0, 0)).unwrap();
        assert!(orthonormality_defect(&u) < 1e-10);
        let stat = incoherence_statistic(&u);
        // Gaussian rows give roughly 3 d / n (per-column 3/n); the bound is loose
        assert!(stat <= 100.0 / n as f64, "stat = {stat}");
    }

    #[test]
    fn too_many_columns_is_a_dimension_error() {
        assert!(matches!(
            generate_subspace(3, 4, &mut trial_rng(0, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn no_signal_no_noise_gives_zeros() {
        let mut rng = trial_rng(1, 0);
        let u = generate_subspace(50, 2, &mut rng).unwrap();
        let model = SubspaceModel::new(u, vec![0.0, 0.0], 0.0, 0.5).unwrap();
        let obs = sample_observation(&model, 0, &mut rng);
        assert!(obs.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn near_one_alpha_observes_everything() {
        let mut rng = trial_rng(2, 0);
        let model = SubspaceModel::random(500, 1, vec![1.0], 1.0, 1.0 - 1e-12, &mut rng).unwrap();
        let obs = sample_observation(&model, 0, &mut rng);
        assert!(obs.mask.iter().all(|&m| m));
        assert_eq!(obs.observed.len(), 500);
    }

    #[test]
    fn observed_fraction_concentrates() {
        let mut rng = trial_rng(7, 0);
        let model = SubspaceModel::random(10_000, 1, vec![1.0], 1.0, 0.5, &mut rng).unwrap();
        let obs = sample_observation(&model, 0, &mut rng);
        let frac = obs.observed.len() as f64 / 1e4;
        assert!((0.48..=0.52).contains(&frac), "fraction {frac}");
        for (i, (&m, &y)) in obs.mask.iter().zip(&obs.y).enumerate() {
            if !m {
                assert_eq!(y, 0.0, "coordinate {i}");
            }
        }
    }

    #[test]
    fn same_seed_same_observations() {
        let build = || {
            let mut rng = trial_rng(11, 4);
            let model = SubspaceModel::random(300, 2, vec![2.0, 1.0], 0.5, 0.3, &mut rng).unwrap();
            (0..5).map(|k| sample_observation(&model, k, &mut rng)).collect::<Vec<_>>()
        };
        let a = build();
        let b = build();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mask, y.mask);
            let bits_x: Vec<u64> = x.y.iter().map(|v| v.to_bits()).collect();
            let bits_y: Vec<u64> = y.y.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_x, bits_y);
        }
    }

    #[test]
    fn projected_covariance_matches_model() {
        let mut rng = trial_rng(5, 0);
        let lambdas = vec![3.0, 1.5];
        let sigma = 0.8;
        let model = SubspaceModel::random(40, 2, lambdas.clone(), sigma, 1.0, &mut rng).unwrap();
        let draws = 100_000;
        let mut cov = [[0.0f64; 2]; 2];
        let mut obs = Observation::empty(40);
        for k in 0..draws {
            sample_observation_into(&model, k, &mut rng, &mut obs);
            let mut proj = [0.0; 2];
            for (j, p) in proj.iter_mut().enumerate() {
                *p = (0..40).map(|i| model.u[(i, j)] * obs.y[i]).sum();
            }
            for a in 0..2 {
                for b in 0..2 {
                    cov[a][b] += proj[a] * proj[b];
                }
            }
        }
        for a in 0..2 {
            let expected = lambdas[a] * lambdas[a] + sigma * sigma;
            let got = cov[a][a] / draws as f64;
            assert!((got - expected).abs() / expected < 0.05, "{got} vs {expected}");
        }
        // off-diagonal: expected 0; compare against the diagonal scale
        let off = cov[0][1] / draws as f64;
        assert!(off.abs() < 0.05 * (lambdas[1] * lambdas[1] + sigma * sigma));
    }

    #[test]
    fn mask_frequency_is_uniform_across_coordinates() {
        let mut rng = trial_rng(9, 0);
        let n = 100;
        let alpha = 0.3;
        let model = SubspaceModel::random(n, 1, vec![1.0], 1.0, alpha, &mut rng).unwrap();
        let draws = 10_000;
        let mut counts = vec![0usize; n];
        let mut obs = Observation::empty(n);
        for k in 0..draws {
            sample_observation_into(&model, k, &mut rng, &mut obs);
            for &i in &obs.observed {
                counts[i] += 1;
            }
        }
        let sd = (alpha * (1.0 - alpha) / draws as f64).sqrt();
        let outliers = counts
            .iter()
            .filter(|&&c| (c as f64 / draws as f64 - alpha).abs() > 3.0 * sd)
            .count();
        assert_eq!(outliers, 0, "coordinates outside 3 sd");
    }

    #[test]
    fn q0_one_reproduces_the_truth() {
        let mut rng = trial_rng(0, 0);
        let u = generate_subspace(100, 3, &mut rng).unwrap();
        let x0 = correlated_init(&u, 1.0, &mut rng).unwrap();
        assert!((&x0 - &u).amax() < 1e-12);
    }

    #[test]
    fn correlated_init_concentrates_at_q0() {
        let mut rng = trial_rng(0, 0);
        let u = generate_subspace(2000, 4, &mut rng).unwrap();
        let x0 = correlated_init(&u, 0.5, &mut rng).unwrap();
        assert!(orthonormality_defect(&x0) < 1e-10);
        let cos = cosine_similarity(&u, &x0).unwrap().cosines;
        assert!(cos.iter().all(|c| (0.45..=0.55).contains(c)), "{cos:?}");

        let mut rng = trial_rng(1, 0);
        let u = generate_subspace(2000, 1, &mut rng).unwrap();
        let x0 = correlated_init(&u, 0.3, &mut rng).unwrap();
        let c = (u.transpose() * &x0)[(0, 0)].abs();
        assert!((0.27..=0.33).contains(&c), "{c}");
    }

    #[test]
    fn correlated_init_rejects_bad_q0() {
        let u = generate_subspace(10, 1, &mut trial_rng(0, 0)).unwrap();
        for q0 in [0.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(
                correlated_init(&u, q0, &mut trial_rng(0, 0)),
                Err(Error::Parameter(_))
            ));
        }
    }

    #[test]
    fn incoherence_examples() {
        let mut m = DMatrix::zeros(6, 3);
        for j in 0..3 {
            m[(j, j)] = 1.0;
        }
        assert_eq!(incoherence_statistic(&m), 3.0);
        assert_eq!(incoherence_statistic(&DMatrix::zeros(5, 2)), 0.0);
        let u = generate_subspace(10_000, 4, &mut trial_rng(4, 0)).unwrap();
        assert!(incoherence_statistic(&u) <= 100.0 / 1e4);
    }

    #[test]
    fn subspace_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        let u = generate_subspace(7, 3, &mut trial_rng(0, 0)).unwrap();
        write_subspace(&path, &u).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"SUBF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 7);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 16 + 7 * 3 * 8);
        // row-major: second value is U[0, 1]
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), u[(0, 1)]);
        assert_eq!(read_subspace(&path).unwrap(), u);
    }

    #[test]
    fn model_validation() {
        let u = generate_subspace(10, 2, &mut trial_rng(0, 0)).unwrap();
        assert!(SubspaceModel::new(u.clone(), vec![1.0, 2.0], 1.0, 0.5).is_err());
        assert!(SubspaceModel::new(u.clone(), vec![2.0, 1.0], 1.0, 0.0).is_err());
        assert!(SubspaceModel::new(u.clone(), vec![2.0], 1.0, 0.5).is_err());
        assert!(SubspaceModel::new(u * 2.0, vec![2.0, 1.0], 1.0, 0.5).is_err());
    }
}
