use nalgebra::DMatrix;

use super::{is_diagonal, rhs_f, rhs_h, rhs_inverse_gram, rhs_petrels_full, OdeParams, OdeState, OdeVars};
use crate::error::{Error, Result};

/// Default RK4 step in rescaled time.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Which limiting system to integrate.
#[derive(Debug, Clone)]
pub enum OdeSystem {
    /// `dQ/dt = F(Q, τ(t) I)`.
    OjaGrouse(OdeParams),
    /// `dQ/dt = F(Q, G)`, `dG/dt = H(Q, G)`.
    PetrelsReduced(OdeParams),
    /// `(A, K, W)` system.
    PetrelsFull(OdeParams),
    /// `dP/dt = A − PB − BP`.
    InverseGram(OdeParams),
}

impl OdeSystem {
    fn params(&self) -> &OdeParams {
        match self {
            OdeSystem::OjaGrouse(p)
            | OdeSystem::PetrelsReduced(p)
            | OdeSystem::PetrelsFull(p)
            | OdeSystem::InverseGram(p) => p,
        }
    }

    fn blocks(&self) -> usize {
        match self {
            OdeSystem::OjaGrouse(_) | OdeSystem::InverseGram(_) => 1,
            OdeSystem::PetrelsReduced(_) => 2,
            OdeSystem::PetrelsFull(_) => 3,
        }
    }

    fn pack(&self, state: &OdeState) -> Result<Vec<f64>> {
        let mats: Vec<&DMatrix<f64>> = match (self, &state.vars) {
            (OdeSystem::OjaGrouse(_), OdeVars::OjaGrouse { q }) => vec![q],
            (OdeSystem::PetrelsReduced(_), OdeVars::PetrelsReduced { q, g }) => {
                if !is_diagonal(g, 1e-12) || !is_diagonal(q, 1e-12) {
                    return Err(Error::Parameter(
                        "the reduced PETRELS system needs diagonal Q and G".into(),
                    ));
                }
                vec![q, g]
            }
            (OdeSystem::PetrelsFull(_), OdeVars::PetrelsFull { a, k, w }) => vec![a, k, w],
            (OdeSystem::InverseGram(_), OdeVars::InverseGram { p }) => vec![p],
            _ => {
                return Err(Error::Parameter(
                    "initial state does not match the ODE system".into(),
                ))
            }
        };
        let d = self.params().d();
        if mats.iter().any(|m| m.shape() != (d, d)) {
            return Err(Error::Dimension(format!("expected {d}x{d} state blocks")));
        }
        Ok(mats.iter().flat_map(|m| m.iter().copied()).collect())
    }

    fn unpack(&self, t: f64, y: &[f64]) -> OdeState {
        let d = self.params().d();
        let block = |i: usize| DMatrix::from_column_slice(d, d, &y[i * d * d..(i + 1) * d * d]);
        let vars = match self {
            OdeSystem::OjaGrouse(_) => OdeVars::OjaGrouse { q: block(0) },
            OdeSystem::PetrelsReduced(_) => OdeVars::PetrelsReduced {
                q: block(0),
                g: block(1),
            },
            OdeSystem::PetrelsFull(_) => OdeVars::PetrelsFull {
                a: block(0),
                k: block(1),
                w: block(2),
            },
            OdeSystem::InverseGram(_) => OdeVars::InverseGram { p: block(0) },
        };
        OdeState { t, vars }
    }

    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let d = self.params().d();
        let dd = d * d;
        let block = |i: usize| DMatrix::from_column_slice(d, d, &y[i * dd..(i + 1) * dd]);
        let mut put = |i: usize, m: DMatrix<f64>| dy[i * dd..(i + 1) * dd].copy_from_slice(m.as_slice());
        match self {
            OdeSystem::OjaGrouse(p) => {
                let g = DMatrix::identity(d, d) * p.tau.at(t);
                put(0, rhs_f(&block(0), &g, p));
            }
            OdeSystem::PetrelsReduced(p) => {
                let (q, g) = (block(0), block(1));
                put(0, rhs_f(&q, &g, p));
                put(1, rhs_h(&q, &g, p));
            }
            OdeSystem::PetrelsFull(p) => {
                let (j1, j2, j3) = rhs_petrels_full(&block(0), &block(1), &block(2), p)
                    .map_err(|e| Error::IntegrationBreakdown {
                        t,
                        reason: e.to_string(),
                    })?;
                put(0, j1);
                put(1, j2);
                put(2, j3);
            }
            OdeSystem::InverseGram(p) => put(0, rhs_inverse_gram(&block(0), t, p)),
        }
        Ok(())
    }

    fn check(&self, t: f64, y: &[f64]) -> Result<()> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBreakdown {
                t,
                reason: "state is no longer finite".into(),
            });
        }
        if let OdeSystem::PetrelsFull(p) = self {
            let d = p.d();
            let dd = d * d;
            for (i, name) in [(0, "A"), (2, "W")] {
                let m = DMatrix::from_column_slice(d, d, &y[i * dd..(i + 1) * dd]);
                if (0.5 * (&m + m.transpose())).cholesky().is_none() {
                    return Err(Error::IntegrationBreakdown {
                        t,
                        reason: format!("{name} lost positive definiteness"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Classical fixed-step RK4 from `(t0, y0)`, returning the state at each of
/// `times` (ascending, `>= t0`). Steps have length `h` except the last one
/// before each output time, which is shortened to land on it exactly.
pub fn rk4_at_times<F, C>(
    mut rhs: F,
    mut check: C,
    y0: &[f64],
    t0: f64,
    times: &[f64],
    h: f64,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    C: FnMut(f64, &[f64]) -> Result<()>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!("step must be positive, got {h}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < t0) {
        return Err(Error::Parameter("output times must be ascending and >= t0".into()));
    }
    let m = y0.len();
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    let mut t = t0;
    let mut out = Vec::with_capacity(times.len());
    check(t, &y)?;
    for &target in times {
        // count full steps so the shortened tail is never a sliver from roundoff
        let span = target - t;
        let full = ((span / h) * (1.0 + 1e-12)).floor() as u64;
        let n_steps = full + u64::from(span - full as f64 * h > 1e-12 * h.max(span.abs()));
        for s in 0..n_steps {
            let step = if s + 1 == n_steps { target - t } else { h };
            rhs(t, &y, &mut k1)?;
            for i in 0..m {
                tmp[i] = y[i] + 0.5 * step * k1[i];
            }
            rhs(t + 0.5 * step, &tmp, &mut k2)?;
            for i in 0..m {
                tmp[i] = y[i] + 0.5 * step * k2[i];
            }
            rhs(t + 0.5 * step, &tmp, &mut k3)?;
            for i in 0..m {
                tmp[i] = y[i] + step * k3[i];
            }
            rhs(t + step, &tmp, &mut k4)?;
            for i in 0..m {
                y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t = if s + 1 == n_steps { target } else { t + step };
            check(t, &y)?;
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Integrate `system` from `state0` and return the state at each of `times`.
pub fn integrate_at(system: &OdeSystem, state0: &OdeState, times: &[f64], h: f64) -> Result<Vec<OdeState>> {
    let y0 = system.pack(state0)?;
    debug_assert_eq!(y0.len(), system.blocks() * system.params().d().pow(2));
    let ys = rk4_at_times(
        |t, y, dy| system.eval(t, y, dy),
        |t, y| system.check(t, y),
        &y0,
        state0.t,
        times,
        h,
    )?;
    Ok(times.iter().zip(ys).map(|(&t, y)| system.unpack(t, &y)).collect())
}

/// Integrate to `t_end`, recording every `sample_interval` (and `t_end` itself).
///
/// The first entry is `state0`.
pub fn integrate(
    system: &OdeSystem,
    state0: &OdeState,
    t_end: f64,
    h: f64,
    sample_interval: f64,
) -> Result<Vec<OdeState>> {
    if t_end < state0.t {
        return Err(Error::Parameter(format!(
            "t_end = {t_end} precedes the initial time {}",
            state0.t
        )));
    }
    if !(sample_interval > 0.0) {
        return Err(Error::Parameter("sample interval must be positive".into()));
    }
    let mut times = Vec::new();
    let mut i = 1u64;
    loop {
        let t = state0.t + i as f64 * sample_interval;
        if t >= t_end - 1e-12 * sample_interval {
            break;
        }
        times.push(t);
        i += 1;
    }
    if t_end > state0.t {
        times.push(t_end);
    }
    let mut out = vec![state0.clone()];
    out.extend(integrate_at(system, state0, &times, h)?);
    Ok(out)
}
