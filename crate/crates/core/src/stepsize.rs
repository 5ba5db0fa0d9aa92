//! Stepsize rules for smoothing sampled observations into a lookup table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepsizeRule {
    /// `a / (a + n - 1)`.
    Harmonic { a: f64 },
    /// Bias-adjusted Kalman filter stepsize. Error statistics are smoothed
    /// with a McClain stepsize that settles at `target`; the result never
    /// drops below `floor`.
    AdaptiveBakf { floor: f64, target: f64 },
}

impl Default for StepsizeRule {
    fn default() -> Self {
        StepsizeRule::AdaptiveBakf {
            floor: 0.05,
            target: 0.1,
        }
    }
}

impl StepsizeRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepsizeRule::Harmonic { a } if !(a.is_finite() && a > 0.0) => {
                Err(Error::invalid("harmonic stepsize needs a > 0"))
            }
            StepsizeRule::AdaptiveBakf { floor, target }
                if !((0.0..=1.0).contains(&floor) && target > 0.0 && target < 1.0) =>
            {
                Err(Error::invalid(
                    "adaptive stepsize needs floor in [0, 1] and target in (0, 1)",
                ))
            }
            _ => Ok(()),
        }
    }
}

pub fn harmonic(a: f64, n: u64) -> f64 {
    a / (a + n as f64 - 1.0)
}

/// Per-entry auxiliaries for a stepsize rule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepsizeState {
    /// Observations seen so far.
    pub n: u64,
    pub alpha: f64,
    /// Smoothed error and squared error.
    pub bias: f64,
    pub second_moment: f64,
    /// Variance multiplier of the current estimate.
    pub lambda: f64,
    /// McClain stepsize used for the error statistics.
    pub nu: f64,
}

impl StepsizeState {
    /// Stepsize for the next observation, given the estimate it will be
    /// blended into.
    pub fn next(&mut self, rule: &StepsizeRule, estimate: f64, observation: f64) -> f64 {
        self.n += 1;
        let alpha = match *rule {
            StepsizeRule::Harmonic { a } => harmonic(a, self.n),
            StepsizeRule::AdaptiveBakf { floor, target } => {
                self.bakf(floor, target, estimate - observation)
            }
        };
        self.alpha = alpha;
        alpha
    }

    fn bakf(&mut self, floor: f64, target: f64, error: f64) -> f64 {
        // The first observation replaces the arbitrary initial estimate, so
        // its error carries no information about noise or drift.
        if self.n == 1 {
            self.lambda = 1.0;
            return 1.0;
        }
        self.nu = if self.n == 2 {
            1.0
        } else {
            self.nu / (1.0 + self.nu - target)
        };
        self.bias = (1.0 - self.nu) * self.bias + self.nu * error;
        self.second_moment = (1.0 - self.nu) * self.second_moment + self.nu * error * error;
        let alpha = if self.second_moment > f64::MIN_POSITIVE {
            let variance =
                ((self.second_moment - self.bias * self.bias) / (1.0 + self.lambda)).max(0.0);
            1.0 - variance / self.second_moment
        } else {
            0.0
        };
        let alpha = alpha.clamp(floor, 1.0);
        self.lambda = (1.0 - alpha).powi(2) * self.lambda + alpha * alpha;
        alpha
    }
}

/// `(1 - alpha) * previous + alpha * observation`.
pub fn smooth(previous: f64, observation: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * previous + alpha * observation
}
