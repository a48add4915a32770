//! Drift measurement and the process-noise gate, plus the entropy-driven
//! measurement noise used by the adaptive-r ablation.

use serde::{Deserialize, Serialize};

use crate::config::FilterConfig;
use crate::error::{Error, Result};
use crate::matrix::{check_len, mean, TokenMatrix};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-token candidate drift for one frame and the baseline it was scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub per_token_drift: Vec<f64>,
    pub mean_drift: f64,
    pub ema_after: f64,
    pub scores: Vec<f64>,
}

/// Euclidean distance between matching rows, and the mean over rows.
pub fn compute_drift(candidate: &TokenMatrix, prev_candidate: &TokenMatrix) -> Result<(Vec<f64>, f64)> {
    prev_candidate.ensure_same_shape(candidate, "drift")?;
    let drift: Vec<f64> = candidate
        .rows()
        .zip(prev_candidate.rows())
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let m = mean(&drift);
    Ok((drift, m))
}

/// One EMA step on the stream-level drift baseline. An unset baseline is
/// seeded from the current mean drift. The floor applies to the stored value.
pub fn update_ema_baseline(ema: Option<f64>, mean_drift: f64, lambda_delta: f64, delta_floor: f64) -> f64 {
    let next = match ema {
        None => mean_drift,
        Some(prev) => (1.0 - lambda_delta) * prev + lambda_delta * mean_drift,
    };
    next.max(delta_floor)
}

pub fn drift_scores(per_token_drift: &[f64], ema: f64, epsilon: f64) -> Vec<f64> {
    let denom = ema + epsilon;
    per_token_drift.iter().map(|d| d / denom).collect()
}

/// Drift, baseline update and normalized scores for one frame, in that order.
pub fn drift_report(
    candidate: &TokenMatrix,
    prev_candidate: &TokenMatrix,
    ema: Option<f64>,
    config: &FilterConfig,
) -> Result<DriftReport> {
    let (per_token_drift, mean_drift) = compute_drift(candidate, prev_candidate)?;
    let ema_after = update_ema_baseline(ema, mean_drift, config.lambda_delta, config.delta_floor);
    let scores = drift_scores(&per_token_drift, ema_after, config.effective_epsilon());
    Ok(DriftReport {
        per_token_drift,
        mean_drift,
        ema_after,
        scores,
    })
}

#[inline]
pub fn gate(score: f64, config: &FilterConfig) -> f64 {
    config.q_min + (config.q_max - config.q_min) * sigmoid(config.alpha_q * (score - config.tau_q))
}

/// Sigmoid-gated process noise, one value per score.
pub fn process_noise(scores: &[f64], config: &FilterConfig) -> Vec<f64> {
    scores.iter().map(|&g| gate(g, config)).collect()
}

/// Parameters of the entropy-driven measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveRParams {
    pub r_min: f64,
    pub r_scale: f64,
    pub alpha_r: f64,
    pub tau_r: f64,
    pub entropy_ema_rate: f64,
    pub epsilon: f64,
}

impl Default for AdaptiveRParams {
    fn default() -> Self {
        Self {
            r_min: 1.0,
            r_scale: 1.0,
            alpha_r: 8.0,
            tau_r: 1.0,
            entropy_ema_rate: 0.05,
            epsilon: 1e-6,
        }
    }
}

impl AdaptiveRParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("r_min", self.r_min),
            ("r_scale", self.r_scale),
            ("alpha_r", self.alpha_r),
            ("tau_r", self.tau_r),
            ("epsilon", self.epsilon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.entropy_ema_rate > 0.0 && self.entropy_ema_rate <= 1.0) {
            return Err(Error::config("entropy_ema_rate", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Noise for a given entropy-to-baseline ratio.
    pub fn noise_for_ratio(&self, ratio: f64) -> f64 {
        self.r_min + self.r_scale * sigmoid(self.alpha_r * (ratio - self.tau_r))
    }
}

/// Aggregated absolute cross-attention from each state token (rows) to
/// each image token (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionSummary {
    weights: Vec<f64>,
    n_tokens: usize,
    n_image_tokens: usize,
}

impl AttentionSummary {
    pub fn new(n_tokens: usize, n_image_tokens: usize, weights: Vec<f64>) -> Result<Self> {
        if n_tokens == 0 || n_image_tokens == 0 {
            return Err(Error::Shape("attention summary must be at least 1x1".into()));
        }
        check_len(n_tokens * n_image_tokens, weights.len(), "attention weights")?;
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("attention weights must be finite and nonnegative".into()));
        }
        let summary = Self {
            weights,
            n_tokens,
            n_image_tokens,
        };
        if let Some(i) = summary.rows().position(|row| row.iter().all(|w| *w == 0.0)) {
            return Err(Error::InvalidInput(format!("attention row {i} is all zero")));
        }
        Ok(summary)
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn n_image_tokens(&self) -> usize {
        self.n_image_tokens
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.weights.chunks_exact(self.n_image_tokens)
    }

    /// Row entropies normalized by `log K`, so a uniform row scores 1.
    pub fn normalized_entropy(&self, epsilon: f64) -> Vec<f64> {
        let log_k = (self.n_image_tokens as f64).ln();
        self.rows()
            .map(|row| {
                let total: f64 = row.iter().sum::<f64>() + epsilon;
                let h: f64 = row
                    .iter()
                    .map(|a| {
                        let p = a / total;
                        if p > 0.0 {
                            -p * p.ln()
                        } else {
                            0.0
                        }
                    })
                    .sum();
                h / (log_k + epsilon)
            })
            .collect()
    }
}

/// Token-wise measurement noise from attention entropy. Returns the noise
/// vector and the updated entropy baseline.
pub fn adaptive_measurement_noise(
    attention: &AttentionSummary,
    ema_entropy: Option<f64>,
    params: &AdaptiveRParams,
) -> (Vec<f64>, f64) {
    let entropy = attention.normalized_entropy(params.epsilon);
    let m = mean(&entropy);
    let ema = match ema_entropy {
        None => m,
        Some(prev) => (1.0 - params.entropy_ema_rate) * prev + params.entropy_ema_rate * m,
    };
    let denom = ema + params.epsilon;
    let r = entropy.iter().map(|h| params.noise_for_ratio(h / denom)).collect();
    (r, ema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[Vec<f64>]) -> TokenMatrix {
        TokenMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn drift_of_identical_matrices_is_zero() {
        let a = m(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(compute_drift(&a, &a).unwrap(), (vec![0.0, 0.0], 0.0));
    }

    #[test]
    fn drift_is_row_euclidean_norm() {
        let a = m(&[vec![3.0, 4.0], vec![0.0, 3.0]]);
        let b = m(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let (d, mean) = compute_drift(&a, &b).unwrap();
        assert_eq!(d, vec![5.0, 3.0]);
        assert_eq!(mean, 4.0);
        let c = m(&[vec![1.0], vec![3.0]]);
        let z = m(&[vec![0.0], vec![0.0]]);
        assert_eq!(compute_drift(&c, &z).unwrap().1, 2.0);
        assert!(matches!(compute_drift(&a, &z), Err(Error::Shape(_))));
    }

    #[test]
    fn ema_baseline_cases() {
        assert_eq!(update_ema_baseline(None, 0.5, 0.05, 0.01), 0.5);
        assert_eq!(update_ema_baseline(None, 0.0, 0.05, 0.01), 0.01);
        assert_eq!(update_ema_baseline(Some(1.0), 1.0, 0.05, 0.01), 1.0);
        assert_eq!(update_ema_baseline(Some(0.01), 0.0, 0.05, 0.01), 0.01);
    }

    #[test]
    fn ema_converges_geometrically() {
        let (lambda, d) = (0.05, 0.7);
        let mut ema = update_ema_baseline(None, 2.0, lambda, 0.01);
        for t in 1..200 {
            ema = update_ema_baseline(Some(ema), d, lambda, 0.01);
            let expected = d + (2.0 - d) * (1.0 - lambda).powi(t);
            assert_abs_diff_eq!(ema, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn scores_normalize_by_baseline() {
        assert_abs_diff_eq!(drift_scores(&[0.5], 0.5, 1e-6)[0], 1.0, epsilon = 1e-5);
        assert_eq!(drift_scores(&[0.0], 0.3, 1e-6), vec![0.0]);
        let g = drift_scores(&[1.5], 0.5, 1e-6);
        assert_abs_diff_eq!(g[0], 3.0, epsilon = 1e-5);
        let q = process_noise(&g, &FilterConfig::default());
        assert_abs_diff_eq!(q[0], 0.26, epsilon = 1e-4);
    }

    #[test]
    fn gate_anchors() {
        let c = FilterConfig::default();
        assert_eq!(gate(3.0, &c), 0.26);
        assert_abs_diff_eq!(gate(0.0, &c), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(gate(6.0, &c), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn uniform_and_one_hot_entropy() {
        let k = 16;
        let uniform = AttentionSummary::new(1, k, vec![0.3; k]).unwrap();
        assert_abs_diff_eq!(uniform.normalized_entropy(1e-6)[0], 1.0, epsilon = 1e-5);
        let mut row = vec![0.0; k];
        row[3] = 2.0;
        let one_hot = AttentionSummary::new(1, k, row).unwrap();
        assert_abs_diff_eq!(one_hot.normalized_entropy(1e-6)[0], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn adaptive_noise_midpoint_and_errors() {
        let p = AdaptiveRParams::default();
        assert_eq!(p.noise_for_ratio(1.0), 1.5);
        assert!(AttentionSummary::new(2, 2, vec![1.0, 1.0, 0.0, 0.0]).is_err());
        assert!(AttentionSummary::new(1, 2, vec![1.0, -1.0]).is_err());

        let uniform = AttentionSummary::new(2, 4, vec![1.0; 8]).unwrap();
        let (r, ema) = adaptive_measurement_noise(&uniform, None, &p);
        assert_abs_diff_eq!(ema, 1.0, epsilon = 1e-5);
        for v in r {
            assert_abs_diff_eq!(v, 1.5, epsilon = 1e-4);
        }
        let (_, ema2) = adaptive_measurement_noise(&uniform, Some(0.5), &p);
        assert_abs_diff_eq!(ema2, 0.95 * 0.5 + 0.05, epsilon = 1e-6);
    }
}
