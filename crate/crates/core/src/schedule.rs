//! Step-size schedules `τ(t)` over rescaled time `t = k/n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounded step-size schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `τ(t) = value`.
    Constant { value: f64 },
    /// `τ(t) = tau0 / (1 + rate·t)`.
    Decaying { tau0: f64, rate: f64 },
    /// `τ(t) = values[i]` for `breaks[i-1] <= t < breaks[i]`; needs one more value than breaks.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl StepSchedule {
    pub fn constant(value: f64) -> Self {
        StepSchedule::Constant { value }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            StepSchedule::Constant { value } => *value,
            StepSchedule::Decaying { tau0, rate } => tau0 / (1.0 + rate * t),
            StepSchedule::Piecewise { breaks, values } => {
                let idx = breaks.partition_point(|&b| b <= t);
                values[idx]
            }
        }
    }

    /// The value if the schedule does not depend on time.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            StepSchedule::Constant { value } => Some(*value),
            StepSchedule::Piecewise { values, .. }
                if values.windows(2).all(|w| w[0] == w[1]) =>
            {
                values.first().copied()
            }
            _ => None,
        }
    }

    /// `sup_t |τ(t)|` over `t >= 0`.
    pub fn bound(&self) -> f64 {
        match self {
            StepSchedule::Constant { value } => value.abs(),
            StepSchedule::Decaying { tau0, .. } => tau0.abs(),
            StepSchedule::Piecewise { values, .. } => {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            StepSchedule::Constant { value } => value.is_finite(),
            StepSchedule::Decaying { tau0, rate } => tau0.is_finite() && rate.is_finite() && *rate >= 0.0,
            StepSchedule::Piecewise { breaks, values } => {
                values.len() == breaks.len() + 1
                    && values.iter().all(|v| v.is_finite())
                    && breaks.windows(2).all(|w| w[0] < w[1])
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid step schedule {self:?}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_evaluate() {
        assert_eq!(StepSchedule::constant(0.5).at(7.0), 0.5);
        let dec = StepSchedule::Decaying { tau0: 0.5, rate: 1.0 };
        assert_eq!(dec.at(1.0), 0.25);
        assert_eq!(dec.bound(), 0.5);
        let pw = StepSchedule::Piecewise {
            breaks: vec![1.0, 2.0],
            values: vec![0.1, 0.2, 0.3],
        };
        assert_eq!(pw.at(0.5), 0.1);
        assert_eq!(pw.at(1.0), 0.2);
        assert_eq!(pw.at(5.0), 0.3);
        assert_eq!(pw.bound(), 0.3);
        assert!(pw.validate().is_ok());
        assert!(StepSchedule::Piecewise { breaks: vec![1.0], values: vec![0.1] }
            .validate()
            .is_err());
    }
}
