//! Per-competitor step generation: the stochastic step distribution and the
//! two deterministic multipliers applied to it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Lower bound of the preference multiplier. A zero multiplier would let a
/// competitor stall forever.
pub const PREFERENCE_FLOOR: f64 = 0.01;

/// Distribution of a competitor's unconstrained step size. Support is
/// strictly positive for every valid parameterization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepDistribution {
    Uniform { lo: f64, hi: f64 },
    Lognormal { mu: f64, sigma: f64, scale: f64 },
}

impl StepDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        StepDistribution::Uniform { lo, hi }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            StepDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                    return Err(ConfigError::new(
                        "",
                        format!("uniform requires 0 < lo <= hi (got lo={lo}, hi={hi})"),
                    ));
                }
            }
            StepDistribution::Lognormal { mu, sigma, scale } => {
                if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) {
                    return Err(ConfigError::new(
                        "",
                        format!("lognormal requires finite mu and sigma >= 0 (got mu={mu}, sigma={sigma})"),
                    ));
                }
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(ConfigError::new(
                        "",
                        format!("lognormal requires scale > 0 (got {scale})"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Draws one step. Always strictly positive.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            StepDistribution::Uniform { lo, hi } => {
                let u: f64 = rng.random();
                if lo == hi {
                    lo
                } else {
                    lo + (hi - lo) * u
                }
            }
            StepDistribution::Lognormal { mu, sigma, scale } => {
                let z: f64 = rng.sample(StandardNormal);
                (scale * (mu + sigma * z).exp()).max(f64::MIN_POSITIVE)
            }
        }
    }

    /// Smallest value the distribution can produce (0 for lognormal).
    pub fn lower_bound(&self) -> f64 {
        match *self {
            StepDistribution::Uniform { lo, .. } => lo,
            StepDistribution::Lognormal { .. } => 0.0,
        }
    }
}

/// Multiplier schedule over the course of the race: `early_mult` before the
/// breakpoint (a fraction of the track length), `late_mult` from it onward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponsivenessParams {
    pub early_mult: f64,
    pub late_mult: f64,
    pub breakpoint: f64,
}

impl Default for ResponsivenessParams {
    fn default() -> Self {
        Self {
            early_mult: 1.0,
            late_mult: 1.0,
            breakpoint: 0.5,
        }
    }
}

impl ResponsivenessParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.early_mult.is_finite() && self.early_mult > 0.0) {
            return Err(ConfigError::new("early_mult", "must be > 0"));
        }
        if !(self.late_mult.is_finite() && self.late_mult > 0.0) {
            return Err(ConfigError::new("late_mult", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.breakpoint) {
            return Err(ConfigError::new("breakpoint", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Step multiplier from the mismatch between the race factor and the
/// competitor's preferred value, clamped to `[PREFERENCE_FLOOR, 1]`.
pub fn preference_factor(race_factor: f64, preference: f64, sensitivity: f64) -> f64 {
    (1.0 - sensitivity * (race_factor - preference).abs()).clamp(PREFERENCE_FLOOR, 1.0)
}

pub fn responsiveness(position: f64, params: &ResponsivenessParams, track_length: f64) -> f64 {
    if position < params.breakpoint * track_length {
        params.early_mult
    } else {
        params.late_mult
    }
}
