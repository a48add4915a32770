//! Filter hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the adaptive filter. `Default` gives the deployed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Initial per-token variance.
    pub p0: f64,
    /// Measurement-noise variance of the candidate.
    pub r: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Sharpness of the process-noise sigmoid.
    pub alpha_q: f64,
    /// Midpoint of the process-noise sigmoid, in drift-score units.
    pub tau_q: f64,
    /// EMA rate of the stream-level drift baseline.
    pub lambda_delta: f64,
    /// Lower bound on the stored drift baseline.
    pub delta_floor: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub epsilon: f64,
    #[serde(skip)]
    pub hooks: VerificationHooks,
}

/// Switches that realize the idealized recursion used by the closed-form
/// analysis. Not reachable from config files.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerificationHooks {
    pub disable_clamps: bool,
    pub disable_epsilon: bool,
    pub forced_q: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            p0: 1.5,
            r: 1.0,
            q_min: 0.02,
            q_max: 0.5,
            alpha_q: 20.0,
            tau_q: 3.0,
            lambda_delta: 0.05,
            delta_floor: 0.01,
            k_min: 0.01,
            k_max: 0.99,
            epsilon: 1e-6,
            hooks: VerificationHooks::default(),
        }
    }
}

impl FilterConfig {
    /// Clamps and epsilon off, process noise pinned to `q`.
    #[doc(hidden)]
    pub fn idealized(p0: f64, r: f64, q: f64) -> Self {
        Self {
            p0,
            r,
            hooks: VerificationHooks {
                disable_clamps: true,
                disable_epsilon: true,
                forced_q: Some(q),
            },
            ..Self::default()
        }
    }

    /// Epsilon as applied to denominators.
    pub fn effective_epsilon(&self) -> f64 {
        if self.hooks.disable_epsilon {
            0.0
        } else {
            self.epsilon
        }
    }

    /// Gain clamp interval as applied.
    pub fn gain_bounds(&self) -> (f64, f64) {
        if self.hooks.disable_clamps {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            (self.k_min, self.k_max)
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("p0", self.p0)?;
        positive("r", self.r)?;
        positive("q_min", self.q_min)?;
        positive("q_max", self.q_max)?;
        positive("alpha_q", self.alpha_q)?;
        positive("tau_q", self.tau_q)?;
        positive("delta_floor", self.delta_floor)?;
        positive("epsilon", self.epsilon)?;
        if self.q_min > self.q_max {
            return Err(Error::config("q_min", "must not exceed q_max"));
        }
        if !(self.lambda_delta > 0.0 && self.lambda_delta <= 1.0) {
            return Err(Error::config("lambda_delta", "must lie in (0, 1]"));
        }
        if !(self.k_min >= 0.0 && self.k_min < 1.0) {
            return Err(Error::config("k_min", "must lie in [0, 1)"));
        }
        if !(self.k_max > 0.0 && self.k_max <= 1.0) {
            return Err(Error::config("k_max", "must lie in (0, 1]"));
        }
        if self.k_min >= self.k_max {
            return Err(Error::config("k_min", "must be below k_max"));
        }
        if let Some(q) = self.hooks.forced_q {
            if !(q.is_finite() && q >= 0.0) {
                return Err(Error::config("forced_q", "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_deployed_values() {
        let c = FilterConfig::default();
        assert_eq!((c.p0, c.r), (1.5, 1.0));
        assert_eq!((c.q_min, c.q_max), (0.02, 0.5));
        assert_eq!((c.alpha_q, c.tau_q), (20.0, 3.0));
        assert_eq!((c.lambda_delta, c.delta_floor), (0.05, 0.01));
        assert_eq!((c.k_min, c.k_max), (0.01, 0.99));
        assert_eq!(c.epsilon, 1e-6);
        c.validate().unwrap();
    }

    #[test]
    fn validation_names_the_field() {
        let c = FilterConfig {
            q_min: 0.6,
            ..FilterConfig::default()
        };
        match c.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "q_min"),
            other => panic!("unexpected {other:?}"),
        }
        let c = FilterConfig {
            k_min: 0.5,
            k_max: 0.4,
            ..FilterConfig::default()
        };
        assert!(c.validate().is_err());
        let c = FilterConfig {
            lambda_delta: 0.0,
            ..FilterConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hooks_are_not_deserializable() {
        let c: FilterConfig = toml::from_str("r = 2.0").unwrap();
        assert_eq!(c.r, 2.0);
        assert_eq!(c.hooks, VerificationHooks::default());
        assert!(toml::from_str::<FilterConfig>("hooks = 1").is_err());
    }
}
