//! Post-hoc summaries over a sequence of per-frame diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::StepDiagnostics;
use crate::matrix::TokenMatrix;

pub const SMOOTHING_WINDOW: usize = 11;
pub const THRESHOLD_PERCENTILE: f64 = 90.0;
pub const PERCENTILE_METHOD: &str = "linear";

/// Smoothed transition score and the windows where it exceeds its
/// percentile threshold. Windows are inclusive frame ranges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionTimeline {
    pub frames: Vec<u64>,
    pub raw_scores: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub threshold: f64,
    pub windows: Vec<(u64, u64)>,
}

impl TransitionTimeline {
    pub fn contains_frame(&self, frame: u64) -> bool {
        self.windows.iter().any(|&(a, b)| a <= frame && frame <= b)
    }
}

pub fn transition_timeline(diagnostics: &[StepDiagnostics]) -> Result<TransitionTimeline> {
    let frames: Vec<u64> = diagnostics.iter().map(|d| d.frame).collect();
    let scores: Vec<f64> = diagnostics.iter().map(|d| d.mean_drift_score).collect();
    timeline_from_scores(&frames, &scores)
}

/// Same as [`transition_timeline`] over bare `(frame, score)` columns.
pub fn timeline_from_scores(frames: &[u64], scores: &[f64]) -> Result<TransitionTimeline> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("transition timeline needs at least one frame".into()));
    }
    if frames.len() != scores.len() {
        return Err(Error::Shape("frames and scores differ in length".into()));
    }
    let smoothed = trailing_mean(scores, SMOOTHING_WINDOW);
    let threshold = percentile(&smoothed, THRESHOLD_PERCENTILE);
    let mut windows = Vec::new();
    let mut open: Option<usize> = None;
    for (t, &v) in smoothed.iter().enumerate() {
        match (v > threshold, open) {
            (true, None) => open = Some(t),
            (false, Some(start)) => {
                windows.push((frames[start], frames[t - 1]));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        windows.push((frames[start], frames[frames.len() - 1]));
    }
    Ok(TransitionTimeline {
        frames: frames.to_vec(),
        raw_scores: scores.to_vec(),
        smoothed,
        threshold,
        windows,
    })
}

/// Mean over the last `window` values up to and including each index,
/// truncated at the start of the sequence.
pub fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    (0..values.len())
        .map(|t| {
            // incremental mean: exact on constant runs
            values[(t + 1).saturating_sub(window)..=t]
                .iter()
                .enumerate()
                .fold(0.0, |m, (j, v)| m + (v - m) / (j + 1) as f64)
        })
        .collect()
}

/// Percentile by linear interpolation between order statistics.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * pct / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Mean applied row update divided by mean offered row update.
pub fn update_ratio(prev_state: &TokenMatrix, new_state: &TokenMatrix, candidate: &TokenMatrix, epsilon: f64) -> Result<f64> {
    prev_state.ensure_same_shape(new_state, "update ratio")?;
    prev_state.ensure_same_shape(candidate, "update ratio")?;
    let mean_norm = |a: &TokenMatrix| {
        let total: f64 = a
            .rows()
            .zip(prev_state.rows())
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
            .sum();
        total / prev_state.n_tokens() as f64
    };
    Ok(mean_norm(new_state) / (mean_norm(candidate) + epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainWindowSummary {
    pub early_mean_gain: f64,
    pub late_mean_gain: f64,
    pub window_len: usize,
}

pub fn gain_window_summary(diagnostics: &[StepDiagnostics], window_fraction: f64) -> Result<GainWindowSummary> {
    let gains: Vec<f64> = diagnostics.iter().map(|d| d.mean_gain).collect();
    gain_window_summary_from(&gains, window_fraction)
}

/// Early/late means of a per-frame mean-gain column.
pub fn gain_window_summary_from(mean_gains: &[f64], window_fraction: f64) -> Result<GainWindowSummary> {
    let t = mean_gains.len();
    if t < 5 {
        return Err(Error::InvalidInput(format!("gain window summary needs at least 5 frames, got {t}")));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidInput("window fraction must lie in (0, 1]".into()));
    }
    let len = ((window_fraction * t as f64).ceil() as usize).clamp(1, t);
    let avg = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok(GainWindowSummary {
        early_mean_gain: avg(&mean_gains[..len]),
        late_mean_gain: avg(&mean_gains[t - len..]),
        window_len: len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn frames(n: usize) -> Vec<u64> {
        (1..=n as u64).collect()
    }

    #[test]
    fn flat_trace_has_no_windows() {
        let tl = timeline_from_scores(&frames(50), &[0.7; 50]).unwrap();
        assert_eq!(tl.threshold, 0.7);
        assert!(tl.windows.is_empty());
    }

    #[test]
    fn single_frame_smoothing_is_identity() {
        let tl = timeline_from_scores(&[1], &[2.5]).unwrap();
        assert_eq!(tl.smoothed, vec![2.5]);
        assert!(timeline_from_scores(&[], &[]).is_err());
    }

    #[test]
    fn spike_gives_one_window() {
        let mut scores = vec![1.0; 1000];
        for s in &mut scores[400..500] {
            *s = 3.0;
        }
        let tl = timeline_from_scores(&frames(1000), &scores).unwrap();
        assert_eq!(tl.windows.len(), 1);
        let (a, b) = tl.windows[0];
        // spike occupies frames 401..=500
        assert!((401..=412).contains(&a), "start {a}");
        assert!((500..=511).contains(&b), "end {b}");
    }

    #[test]
    fn trailing_mean_truncates_at_start() {
        let v: Vec<f64> = (1..=15).map(f64::from).collect();
        let s = trailing_mean(&v, 11);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[1], 1.5);
        assert_abs_diff_eq!(s[14], (5..=15).sum::<i32>() as f64 / 11.0, epsilon = 1e-12);
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 90.0), 4.6);
        assert_eq!(percentile(&[3.0], 90.0), 3.0);
    }

    #[test]
    fn update_ratio_limits() {
        let prev = TokenMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let cand = TokenMatrix::from_rows(&[vec![3.0, 4.0], vec![1.0, -1.0]]).unwrap();
        assert_abs_diff_eq!(update_ratio(&prev, &cand, &cand, 1e-6).unwrap(), 1.0, epsilon = 1e-6);
        assert_eq!(update_ratio(&prev, &prev, &cand, 1e-6).unwrap(), 0.0);
        let k = 0.3;
        let fused = crate::filter::fuse_state(&prev, &cand, &[k, k]).unwrap();
        assert_abs_diff_eq!(update_ratio(&prev, &fused, &cand, 0.0).unwrap(), k, epsilon = 1e-12);
        assert!(update_ratio(&prev, &TokenMatrix::zeros(1, 2).unwrap(), &cand, 0.0).is_err());
    }

    #[test]
    fn gain_windows() {
        let s = gain_window_summary_from(&[0.4; 10], 0.2).unwrap();
        assert_eq!(s.early_mean_gain, s.late_mean_gain);
        let decreasing: Vec<f64> = (0..20).map(|t| 1.0 / (t as f64 + 1.0)).collect();
        let s = gain_window_summary_from(&decreasing, 0.2).unwrap();
        assert!(s.early_mean_gain > s.late_mean_gain);
        assert_eq!(s.window_len, 4);
        assert!(gain_window_summary_from(&[0.1; 4], 0.2).is_err());
    }
}
