//! Synthetic latent streams with known ground truth.
//!
//! The latent is a Gaussian random walk with optional injected jumps, and
//! each candidate is the latent plus i.i.d. Gaussian noise. Every random
//! component draws from its own ChaCha8 stream so that, for example,
//! changing the measurement noise leaves the latent path untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::FilterConfig;
use crate::error::{Error, Result};
use crate::filter::{init_state, StepDiagnostics};
use crate::noise::AttentionSummary;
use crate::policy::{policy_step, UpdatePolicy};
use crate::TokenMatrix;

/// Identifies the sampling algorithm; written into trace headers.
pub const GENERATOR_VERSION: &str = "chacha8-streams-v1";

const LATENT_STREAM: u64 = 0;
const MEASUREMENT_STREAM: u64 = 1;
const TRANSITION_STREAM: u64 = 2;
const ATTENTION_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    /// 1-based frame at which the jump is first visible.
    pub frame: u64,
    /// Euclidean length of the per-token jump.
    pub magnitude: f64,
}

/// Scripted attention summaries: near-uniform rows on ordinary frames and
/// one-hot-leaning rows on transition frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionScenario {
    pub n_image_tokens: usize,
    /// Relative jitter added to uniform rows.
    pub jitter: f64,
    /// Weight of the non-dominant entries on transition frames.
    pub leak: f64,
}

impl Default for AttentionScenario {
    fn default() -> Self {
        Self {
            n_image_tokens: 32,
            jitter: 0.1,
            leak: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamScenario {
    pub n_tokens: usize,
    pub dim: usize,
    pub length: usize,
    /// Per-entry std of the latent random-walk increments.
    #[serde(default)]
    pub base_process_std: f64,
    /// Per-entry std of the candidate noise.
    pub measurement_std: f64,
    #[serde(default)]
    pub transitions: Vec<Transition>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub attention: Option<AttentionScenario>,
}

impl StreamScenario {
    /// A static latent observed through noise of the given std.
    pub fn static_scene(n_tokens: usize, dim: usize, length: usize, measurement_std: f64, seed: u64) -> Self {
        Self {
            n_tokens,
            dim,
            length,
            base_process_std: 0.0,
            measurement_std,
            transitions: Vec::new(),
            seed,
            attention: None,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tokens == 0 {
            return Err(Error::config("n_tokens", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::config("dim", "must be at least 1"));
        }
        if self.length == 0 {
            return Err(Error::config("length", "must be at least 1"));
        }
        if !(self.base_process_std.is_finite() && self.base_process_std >= 0.0) {
            return Err(Error::config("base_process_std", "must be finite and nonnegative"));
        }
        if !(self.measurement_std.is_finite() && self.measurement_std >= 0.0) {
            return Err(Error::config("measurement_std", "must be finite and nonnegative"));
        }
        let mut last = 1;
        for tr in &self.transitions {
            if tr.frame <= last || tr.frame > self.length as u64 {
                return Err(Error::config(
                    "transitions",
                    format!(
                        "frames must be strictly increasing within [2, {}], got {}",
                        self.length, tr.frame
                    ),
                ));
            }
            if !(tr.magnitude.is_finite() && tr.magnitude > 0.0) {
                return Err(Error::config("transitions", "magnitude must be positive"));
            }
            last = tr.frame;
        }
        if let Some(att) = &self.attention {
            if att.n_image_tokens == 0 {
                return Err(Error::config("n_image_tokens", "must be at least 1"));
            }
            if !(att.jitter.is_finite() && att.jitter >= 0.0) {
                return Err(Error::config("jitter", "must be finite and nonnegative"));
            }
            if !(att.leak.is_finite() && att.leak >= 0.0) {
                return Err(Error::config("leak", "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// A realized stream: frame `t` (1-based) lives at index `t - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamTrace {
    pub true_latents: Vec<TokenMatrix>,
    pub candidates: Vec<TokenMatrix>,
    pub attention: Option<Vec<AttentionSummary>>,
    pub transition_frames: Vec<u64>,
    pub seed: u64,
    pub generator: String,
}

impl StreamTrace {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.candidates.first().map_or((0, 0), TokenMatrix::shape)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn generate(scenario: &StreamScenario) -> Result<StreamTrace> {
    scenario.validate()?;
    let (n, d, len) = (scenario.n_tokens, scenario.dim, scenario.length);
    let mut latent_rng = rng(scenario.seed, LATENT_STREAM);
    let mut noise_rng = rng(scenario.seed, MEASUREMENT_STREAM);
    let mut jump_rng = rng(scenario.seed, TRANSITION_STREAM);
    let mut attention_rng = rng(scenario.seed, ATTENTION_STREAM);

    let mut latent: Vec<f64> = (0..n * d).map(|_| gaussian(&mut latent_rng)).collect();
    let mut true_latents = Vec::with_capacity(len);
    let mut candidates = Vec::with_capacity(len);
    let mut attention = scenario.attention.map(|_| Vec::with_capacity(len));
    let mut transitions = scenario.transitions.iter().peekable();

    for frame in 1..=len as u64 {
        if frame > 1 {
            for x in &mut latent {
                *x += scenario.base_process_std * gaussian(&mut latent_rng);
            }
        }
        let jumped = transitions.next_if(|tr| tr.frame == frame);
        if let Some(tr) = jumped {
            for row in latent.chunks_exact_mut(d) {
                let dir: Vec<f64> = (0..d).map(|_| gaussian(&mut jump_rng)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (x, u) in row.iter_mut().zip(&dir) {
                    *x += tr.magnitude * u / norm;
                }
            }
        }
        let candidate: Vec<f64> = latent
            .iter()
            .map(|x| x + scenario.measurement_std * gaussian(&mut noise_rng))
            .collect();
        true_latents.push(TokenMatrix::new(n, d, latent.clone())?);
        candidates.push(TokenMatrix::new(n, d, candidate)?);
        if let (Some(att), Some(frames)) = (&scenario.attention, attention.as_mut()) {
            frames.push(scripted_attention(att, n, jumped.is_some(), &mut attention_rng)?);
        }
    }

    Ok(StreamTrace {
        true_latents,
        candidates,
        attention,
        transition_frames: scenario.transitions.iter().map(|t| t.frame).collect(),
        seed: scenario.seed,
        generator: GENERATOR_VERSION.to_string(),
    })
}

fn scripted_attention(
    att: &AttentionScenario,
    n_tokens: usize,
    transition: bool,
    rng: &mut ChaCha8Rng,
) -> Result<AttentionSummary> {
    let k = att.n_image_tokens;
    let mut weights = Vec::with_capacity(n_tokens * k);
    for _ in 0..n_tokens {
        if transition {
            let hot = rng.random_range(0..k);
            weights.extend((0..k).map(|j| if j == hot { 1.0 } else { att.leak }));
        } else {
            weights.extend((0..k).map(|_| 1.0 + att.jitter * rng.random::<f64>()));
        }
    }
    AttentionSummary::new(n_tokens, k, weights)
}

/// Root-mean-square entry error between two matrices of equal shape.
pub fn rmse(estimate: &TokenMatrix, truth: &TokenMatrix) -> f64 {
    let sq: f64 = estimate
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (sq / estimate.as_slice().len() as f64).sqrt()
}

/// One evaluated frame. `diagnostics` is `None` on the initializing frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameRecord<'a> {
    pub frame: u64,
    pub rmse: f64,
    pub diagnostics: Option<&'a StepDiagnostics>,
}

/// Runs `policy` over the trace, handing each frame to `sink` as soon as it
/// is produced.
pub fn evaluate_with<F>(trace: &StreamTrace, policy: &UpdatePolicy, config: &FilterConfig, mut sink: F) -> Result<()>
where
    F: FnMut(FrameRecord<'_>) -> Result<()>,
{
    policy.validate()?;
    if trace.is_empty() {
        return Err(Error::InvalidInput("trace has no frames".into()));
    }
    if trace.true_latents.len() != trace.len() {
        return Err(Error::Shape("latent and candidate frame counts differ".into()));
    }
    let attention = trace.attention.as_deref();
    if policy.needs_attention() && attention.is_none() {
        return Err(Error::MissingInput(format!("policy {policy} needs attention summaries")));
    }
    let mut state = init_state(&trace.candidates[0], config.clone())?;
    trace.true_latents[0].ensure_same_shape(state.fused(), "true latent")?;
    sink(FrameRecord {
        frame: 1,
        rmse: rmse(state.fused(), &trace.true_latents[0]),
        diagnostics: None,
    })?;
    for t in 1..trace.len() {
        let att = attention.and_then(|a| a.get(t));
        let (next, diagnostics) = policy_step(policy, state, &trace.candidates[t], att)?;
        trace.true_latents[t].ensure_same_shape(next.fused(), "true latent")?;
        sink(FrameRecord {
            frame: t as u64 + 1,
            rmse: rmse(next.fused(), &trace.true_latents[t]),
            diagnostics: Some(&diagnostics),
        })?;
        state = next;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    /// State RMSE per frame, index `t - 1` for frame `t`.
    pub rmse: Vec<f64>,
    /// Step diagnostics for frames `2..=T`.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl EvaluationReport {
    pub fn final_rmse(&self) -> f64 {
        *self.rmse.last().expect("non-empty report")
    }

    /// RMSE pooled over the first `len` frames.
    pub fn cumulative_rmse(&self, len: usize) -> Option<f64> {
        cumulative_rmse(&self.rmse, len)
    }

    pub fn mean_gains(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.mean_gain).collect()
    }
}

pub fn cumulative_rmse(per_frame: &[f64], len: usize) -> Option<f64> {
    if len == 0 || len > per_frame.len() {
        return None;
    }
    Some((per_frame[..len].iter().map(|r| r * r).sum::<f64>() / len as f64).sqrt())
}

pub fn evaluate(trace: &StreamTrace, policy: &UpdatePolicy, config: &FilterConfig) -> Result<EvaluationReport> {
    let mut report = EvaluationReport {
        rmse: Vec::with_capacity(trace.len()),
        diagnostics: Vec::with_capacity(trace.len().saturating_sub(1)),
    };
    evaluate_with(trace, policy, config, |rec| {
        report.rmse.push(rec.rmse);
        if let Some(d) = rec.diagnostics {
            report.diagnostics.push(d.clone());
        }
        Ok(())
    })?;
    Ok(report)
}
