//! Update rules: the full adaptive filter and the ablation variants that
//! each remove or replace one ingredient of it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{self, check_candidate, FilterState, NoiseSource, StepDiagnostics, StepOptions};
use crate::matrix::check_len;
use crate::noise::{self, AdaptiveRParams, AttentionSummary, DriftReport};
use crate::TokenMatrix;

pub const DEFAULT_RESET_INTERVAL: u64 = 100;

/// A latent-state update rule. Serialized with a lower-kebab-case `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum UpdatePolicy {
    /// Gated process noise, propagated variance, fixed `r`.
    Filt3rFull,
    /// `s_t = s̃_t`.
    Overwrite,
    /// Constant gain `beta`, no variance recursion.
    FixedBeta { beta: f64 },
    /// Constant process noise; `None` means the midpoint of `[q_min, q_max]`.
    FixedQ {
        #[serde(default)]
        q_bar: Option<f64>,
    },
    /// Variance reset to `p0` before every predict.
    ResetP,
    /// Gate driven by raw drift instead of the normalized score.
    NoEmaNorm,
    /// Token-wise `r` from attention entropy.
    AdaptiveR {
        #[serde(default)]
        params: AdaptiveRParams,
    },
    /// Reinitializes the wrapped policy every `interval` frames.
    PeriodicReset {
        #[serde(default = "default_interval")]
        interval: u64,
        #[serde(default = "default_inner")]
        inner: Box<UpdatePolicy>,
    },
}

fn default_interval() -> u64 {
    DEFAULT_RESET_INTERVAL
}

fn default_inner() -> Box<UpdatePolicy> {
    Box::new(UpdatePolicy::Filt3rFull)
}

impl UpdatePolicy {
    pub fn periodic_reset(inner: UpdatePolicy) -> Self {
        UpdatePolicy::PeriodicReset {
            interval: DEFAULT_RESET_INTERVAL,
            inner: Box::new(inner),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UpdatePolicy::FixedBeta { beta } if !(0.0..=1.0).contains(beta) => {
                Err(Error::config("beta", format!("must lie in [0, 1], got {beta}")))
            }
            UpdatePolicy::FixedQ { q_bar: Some(q) } if !(q.is_finite() && *q > 0.0) => {
                Err(Error::config("q_bar", format!("must be positive, got {q}")))
            }
            UpdatePolicy::AdaptiveR { params } => params.validate(),
            UpdatePolicy::PeriodicReset { interval, inner } => {
                if *interval == 0 {
                    return Err(Error::config("interval", "must be at least 1"));
                }
                if matches!(**inner, UpdatePolicy::PeriodicReset { .. }) {
                    return Err(Error::config("inner", "periodic resets cannot be nested"));
                }
                inner.validate()
            }
            _ => Ok(()),
        }
    }

    pub fn needs_attention(&self) -> bool {
        match self {
            UpdatePolicy::AdaptiveR { .. } => true,
            UpdatePolicy::PeriodicReset { inner, .. } => inner.needs_attention(),
            _ => false,
        }
    }

    /// Short identifier, safe for file names.
    pub fn label(&self) -> String {
        match self {
            UpdatePolicy::Filt3rFull => "filt3r-full".into(),
            UpdatePolicy::Overwrite => "overwrite".into(),
            UpdatePolicy::FixedBeta { beta } => format!("fixed-beta-{beta}"),
            UpdatePolicy::FixedQ { q_bar: None } => "fixed-q".into(),
            UpdatePolicy::FixedQ { q_bar: Some(q) } => format!("fixed-q-{q}"),
            UpdatePolicy::ResetP => "reset-p".into(),
            UpdatePolicy::NoEmaNorm => "no-ema-norm".into(),
            UpdatePolicy::AdaptiveR { .. } => "adaptive-r".into(),
            UpdatePolicy::PeriodicReset { interval, inner } => {
                format!("periodic-reset-{interval}-{}", inner.label())
            }
        }
    }
}

impl fmt::Display for UpdatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Absorbs one frame under `policy`.
pub fn policy_step(
    policy: &UpdatePolicy,
    state: FilterState,
    candidate: &TokenMatrix,
    attention: Option<&AttentionSummary>,
) -> Result<(FilterState, StepDiagnostics)> {
    match policy {
        UpdatePolicy::Filt3rFull => filter::step(state, candidate),
        UpdatePolicy::Overwrite => fixed_gain_step(state, candidate, 1.0),
        UpdatePolicy::FixedBeta { beta } => fixed_gain_step(state, candidate, *beta),
        UpdatePolicy::FixedQ { q_bar } => {
            let q = q_bar.unwrap_or(0.5 * (state.config.q_min + state.config.q_max));
            let options = StepOptions {
                noise: NoiseSource::Constant(q),
                ..StepOptions::default()
            };
            filter::step_with(state, candidate, options)
        }
        UpdatePolicy::ResetP => {
            let options = StepOptions {
                reset_variance: true,
                ..StepOptions::default()
            };
            filter::step_with(state, candidate, options)
        }
        UpdatePolicy::NoEmaNorm => {
            let options = StepOptions {
                noise: NoiseSource::RawDriftGate,
                ..StepOptions::default()
            };
            filter::step_with(state, candidate, options)
        }
        UpdatePolicy::AdaptiveR { params } => {
            let attention =
                attention.ok_or_else(|| Error::MissingInput("adaptive-r requires an attention summary".into()))?;
            check_len(state.n_tokens(), attention.n_tokens(), "attention rows")?;
            check_candidate(&state, candidate)?;
            let (r, ema_entropy) = noise::adaptive_measurement_noise(attention, state.ema_entropy, params);
            let options = StepOptions {
                measurement_noise: Some(&r),
                ..StepOptions::default()
            };
            let (mut next, diagnostics) = filter::step_with(state, candidate, options)?;
            next.ema_entropy = Some(ema_entropy);
            Ok((next, diagnostics))
        }
        UpdatePolicy::PeriodicReset { interval, inner } => {
            let frame = state.frame_index + 1;
            if (frame - 1).is_multiple_of(*interval) {
                reset_step(state, candidate, frame)
            } else {
                policy_step(inner, state, candidate, attention)
            }
        }
    }
}

/// Constant-gain interpolation; the variance is carried through untouched.
fn fixed_gain_step(mut state: FilterState, candidate: &TokenMatrix, beta: f64) -> Result<(FilterState, StepDiagnostics)> {
    check_candidate(&state, candidate)?;
    let n = state.n_tokens();
    let config = &state.config;
    let drift = noise::drift_report(candidate, &state.prev_candidate, state.ema_drift, config)?;
    let q = noise::process_noise(&drift.scores, config);
    let gains = vec![beta; n];
    let fused = filter::fuse_state(&state.fused, candidate, &gains)?;
    let rho = crate::diagnostics::update_ratio(&state.fused, &fused, candidate, config.effective_epsilon())?;
    let variance = state.variance.as_slice().to_vec();
    let diagnostics = filter::assemble_diagnostics(
        state.frame_index + 1,
        gains,
        q,
        &drift,
        vec![config.r; n],
        variance.clone(),
        variance,
        rho,
    );
    state.fused = fused;
    state.prev_candidate.as_mut_slice().copy_from_slice(candidate.as_slice());
    state.ema_drift = Some(drift.ema_after);
    state.frame_index += 1;
    Ok((state, diagnostics))
}

/// Re-creates the state from `candidate` and clears all temporal buffers.
fn reset_step(state: FilterState, candidate: &TokenMatrix, frame: u64) -> Result<(FilterState, StepDiagnostics)> {
    check_candidate(&state, candidate)?;
    let config = state.config.clone();
    let n = state.n_tokens();
    let mut fresh = filter::init_state(candidate, config)?;
    fresh.frame_index = frame;
    let rho = crate::diagnostics::update_ratio(&state.fused, &fresh.fused, candidate, fresh.config.effective_epsilon())?;
    let cleared = DriftReport {
        per_token_drift: vec![0.0; n],
        mean_drift: 0.0,
        ema_after: 0.0,
        scores: vec![0.0; n],
    };
    let p0 = vec![fresh.config.p0; n];
    let mut diagnostics = filter::assemble_diagnostics(
        frame,
        vec![1.0; n],
        noise::process_noise(&cleared.scores, &fresh.config),
        &cleared,
        vec![fresh.config.r; n],
        p0.clone(),
        p0,
        rho,
    );
    diagnostics.ema_drift = None;
    Ok((fresh, diagnostics))
}
