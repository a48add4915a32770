//! The scalar-per-token Kalman recursion over latent tokens.
//!
//! Each token carries one variance shared by its `D` components. A frame is
//! processed as: drift and baseline update, process noise, variance predict,
//! clamped gain, gain-weighted fusion, Joseph variance update, then the
//! candidate and variance are buffered for the next frame.

use serde::Serialize;

use crate::config::FilterConfig;
use crate::error::{Error, Result};
use crate::matrix::{check_len, mean, TokenMatrix, VarianceVector};
use crate::noise::{self, DriftReport};

/// Persistent per-stream filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub(crate) fused: TokenMatrix,
    pub(crate) variance: VarianceVector,
    pub(crate) prev_candidate: TokenMatrix,
    pub(crate) ema_drift: Option<f64>,
    pub(crate) ema_entropy: Option<f64>,
    pub(crate) frame_index: u64,
    pub(crate) config: FilterConfig,
}

impl FilterState {
    pub fn fused(&self) -> &TokenMatrix {
        &self.fused
    }

    pub fn variance(&self) -> &VarianceVector {
        &self.variance
    }

    pub fn prev_candidate(&self) -> &TokenMatrix {
        &self.prev_candidate
    }

    /// Drift baseline, `None` until the first temporal difference is seen.
    pub fn ema_drift(&self) -> Option<f64> {
        self.ema_drift
    }

    pub fn ema_entropy(&self) -> Option<f64> {
        self.ema_entropy
    }

    /// 1-based index of the last frame absorbed.
    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn n_tokens(&self) -> usize {
        self.fused.n_tokens()
    }
}

/// Everything measured while absorbing one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub frame: u64,
    pub gains: Vec<f64>,
    pub process_noise: Vec<f64>,
    pub drift_scores: Vec<f64>,
    pub measurement_noise: Vec<f64>,
    pub predicted_variance: Vec<f64>,
    pub posterior_variance: Vec<f64>,
    /// Drift baseline after this frame; `None` when temporal buffers were cleared.
    pub ema_drift: Option<f64>,
    pub mean_gain: f64,
    pub mean_process_noise: f64,
    pub mean_posterior_variance: f64,
    pub update_ratio: f64,
    /// Per-frame transition score: the mean normalized drift.
    pub mean_drift_score: f64,
}

/// Creates the state from the first candidate by direct overwrite.
pub fn init_state(candidate: &TokenMatrix, config: FilterConfig) -> Result<FilterState> {
    config.validate()?;
    candidate.ensure_finite("candidate")?;
    Ok(FilterState {
        fused: candidate.clone(),
        variance: VarianceVector::filled(candidate.n_tokens(), config.p0)?,
        prev_candidate: candidate.clone(),
        ema_drift: None,
        ema_entropy: None,
        frame_index: 1,
        config,
    })
}

pub fn predict_variance(variance: &VarianceVector, q: &[f64]) -> Result<VarianceVector> {
    check_len(variance.len(), q.len(), "process noise")?;
    Ok(VarianceVector::from_vec_unchecked(
        variance.as_slice().iter().zip(q).map(|(p, q)| p + q).collect(),
    ))
}

#[inline]
fn gain(predicted: f64, r: f64, epsilon: f64, (lo, hi): (f64, f64)) -> f64 {
    (predicted / (predicted + r + epsilon)).clamp(lo, hi)
}

/// `p⁻ / (p⁻ + r + epsilon)`, clamped to `[k_min, k_max]`.
pub fn compute_gain(predicted_variance: &VarianceVector, r: f64, k_min: f64, k_max: f64, epsilon: f64) -> Vec<f64> {
    predicted_variance
        .as_slice()
        .iter()
        .map(|&p| gain(p, r, epsilon, (k_min, k_max)))
        .collect()
}

#[inline]
fn fuse_value(prev: f64, candidate: f64, k: f64) -> f64 {
    // exact at both ends so the overwrite and frozen limits are bitwise
    if k == 1.0 {
        candidate
    } else if k == 0.0 {
        prev
    } else {
        prev + k * (candidate - prev)
    }
}

/// Row-wise convex combination `(1 - k_i) prev_i + k_i candidate_i`.
pub fn fuse_state(prev: &TokenMatrix, candidate: &TokenMatrix, gains: &[f64]) -> Result<TokenMatrix> {
    prev.ensure_same_shape(candidate, "fuse")?;
    check_len(prev.n_tokens(), gains.len(), "gains")?;
    let mut out = prev.clone();
    fuse_in_place(&mut out, candidate, gains);
    Ok(out)
}

/// Fuses into `state` and returns the mean applied and mean offered row
/// update magnitudes.
fn fuse_in_place(state: &mut TokenMatrix, candidate: &TokenMatrix, gains: &[f64]) -> (f64, f64) {
    let dim = state.dim();
    let mut applied = 0.0;
    let mut offered = 0.0;
    for ((row, cand), &k) in state
        .as_mut_slice()
        .chunks_exact_mut(dim)
        .zip(candidate.rows())
        .zip(gains)
    {
        let mut a = 0.0;
        let mut o = 0.0;
        for (s, &c) in row.iter_mut().zip(cand) {
            let old = *s;
            let new = fuse_value(old, c, k);
            a += (new - old) * (new - old);
            o += (c - old) * (c - old);
            *s = new;
        }
        applied += a.sqrt();
        offered += o.sqrt();
    }
    let n = gains.len() as f64;
    (applied / n, offered / n)
}

/// Joseph-form posterior variance `(1 - k)² p⁻ + k² r`.
pub fn update_variance_joseph(predicted_variance: &VarianceVector, gains: &[f64], r: f64) -> Result<VarianceVector> {
    check_len(predicted_variance.len(), gains.len(), "gains")?;
    Ok(VarianceVector::from_vec_unchecked(
        predicted_variance
            .as_slice()
            .iter()
            .zip(gains)
            .map(|(&p, &k)| joseph(p, k, r))
            .collect(),
    ))
}

#[inline]
fn joseph(p: f64, k: f64, r: f64) -> f64 {
    (1.0 - k) * (1.0 - k) * p + k * k * r
}

/// Where the per-token process noise comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum NoiseSource {
    /// Sigmoid gate on EMA-normalized drift.
    Gate,
    /// Sigmoid gate on raw drift magnitudes.
    RawDriftGate,
    Constant(f64),
}

/// Variations of the Kalman step used by the ablation policies.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepOptions<'a> {
    pub noise: NoiseSource,
    pub reset_variance: bool,
    pub measurement_noise: Option<&'a [f64]>,
}

impl Default for StepOptions<'_> {
    fn default() -> Self {
        Self {
            noise: NoiseSource::Gate,
            reset_variance: false,
            measurement_noise: None,
        }
    }
}

pub(crate) fn check_candidate(state: &FilterState, candidate: &TokenMatrix) -> Result<()> {
    state.fused.ensure_same_shape(candidate, "candidate")?;
    candidate.ensure_finite("candidate")
}

/// Absorbs one frame into the state.
pub fn step(state: FilterState, candidate: &TokenMatrix) -> Result<(FilterState, StepDiagnostics)> {
    step_with(state, candidate, StepOptions::default())
}

pub(crate) fn step_with(
    mut state: FilterState,
    candidate: &TokenMatrix,
    options: StepOptions<'_>,
) -> Result<(FilterState, StepDiagnostics)> {
    check_candidate(&state, candidate)?;
    let n = state.n_tokens();
    let config = &state.config;
    let epsilon = config.effective_epsilon();

    let drift = noise::drift_report(candidate, &state.prev_candidate, state.ema_drift, config)?;
    let source = match config.hooks.forced_q {
        Some(q) => NoiseSource::Constant(q),
        None => options.noise,
    };
    let q = match source {
        NoiseSource::Gate => noise::process_noise(&drift.scores, config),
        NoiseSource::RawDriftGate => noise::process_noise(&drift.per_token_drift, config),
        NoiseSource::Constant(q) => vec![q; n],
    };

    let r: Vec<f64> = match options.measurement_noise {
        Some(r) => {
            check_len(n, r.len(), "measurement noise")?;
            if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidInput("measurement noise must be positive".into()));
            }
            r.to_vec()
        }
        None => vec![config.r; n],
    };

    let prior = if options.reset_variance {
        VarianceVector::filled(n, config.p0)?
    } else {
        state.variance.clone()
    };
    let predicted = predict_variance(&prior, &q)?;
    let bounds = config.gain_bounds();
    let gains: Vec<f64> = predicted
        .as_slice()
        .iter()
        .zip(&r)
        .map(|(&p, &r)| gain(p, r, epsilon, bounds))
        .collect();

    let (applied, offered) = fuse_in_place(&mut state.fused, candidate, &gains);
    let posterior = VarianceVector::from_vec_unchecked(
        predicted
            .as_slice()
            .iter()
            .zip(&gains)
            .zip(&r)
            .map(|((&p, &k), &r)| joseph(p, k, r))
            .collect(),
    );

    let diagnostics = assemble_diagnostics(
        state.frame_index + 1,
        gains,
        q,
        &drift,
        r,
        predicted.into_vec(),
        posterior.as_slice().to_vec(),
        applied / (offered + epsilon),
    );
    state.variance = posterior;
    state.prev_candidate.as_mut_slice().copy_from_slice(candidate.as_slice());
    state.ema_drift = Some(drift.ema_after);
    state.frame_index += 1;
    Ok((state, diagnostics))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_diagnostics(
    frame: u64,
    gains: Vec<f64>,
    process_noise: Vec<f64>,
    drift: &DriftReport,
    measurement_noise: Vec<f64>,
    predicted_variance: Vec<f64>,
    posterior_variance: Vec<f64>,
    update_ratio: f64,
) -> StepDiagnostics {
    StepDiagnostics {
        frame,
        mean_gain: mean(&gains),
        mean_process_noise: mean(&process_noise),
        mean_posterior_variance: mean(&posterior_variance),
        mean_drift_score: mean(&drift.scores),
        ema_drift: Some(drift.ema_after),
        gains,
        process_noise,
        drift_scores: drift.scores.clone(),
        measurement_noise,
        predicted_variance,
        posterior_variance,
        update_ratio,
    }
}
