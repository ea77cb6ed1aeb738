use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step size for the parameter ascent step of window `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `η_n = K² / (√n · max(n_t, 1))` with `n_t` the window's event count.
    AlgorithmDefault,
    /// `η_n = c / n^α`, applied to the gradient divided by `|A|`.
    PowerLaw { alpha: f64, c: f64 },
    /// `η_n = c / √T`, applied to the gradient divided by `|A|`.
    FlatSqrtT { c: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::AlgorithmDefault
    }
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::AlgorithmDefault => Ok(()),
            StepSchedule::PowerLaw { alpha, c } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
                }
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::invalid(format!("step constant must be positive, got {c}")));
                }
                Ok(())
            }
            StepSchedule::FlatSqrtT { c } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::invalid(format!("step constant must be positive, got {c}")));
                }
                Ok(())
            }
        }
    }

    /// Raw step size for window `n` (1-based).
    pub fn eta(&self, n: usize, n_events: usize, k: usize, horizon: f64) -> f64 {
        match *self {
            StepSchedule::AlgorithmDefault => {
                (k * k) as f64 / ((n as f64).sqrt() * n_events.max(1) as f64)
            }
            StepSchedule::PowerLaw { alpha, c } => c / (n as f64).powf(alpha),
            StepSchedule::FlatSqrtT { c } => c / horizon.max(f64::MIN_POSITIVE).sqrt(),
        }
    }

    /// Multiplier applied to the raw gradient: `η` or `η / |A|`.
    pub fn multiplier(&self, n: usize, n_events: usize, k: usize, horizon: f64, n_pairs: usize) -> f64 {
        let eta = self.eta(n, n_events, k, horizon);
        match self {
            StepSchedule::AlgorithmDefault => eta,
            _ => eta / n_pairs.max(1) as f64,
        }
    }
}
