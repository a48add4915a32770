//! WebAssembly bindings behind the interactive demo in `www/`.
//!
//! Three operations are exposed: simulate a policy over a synthetic stream,
//! sweep the steady-state gain against q/r, and trace the static-scene gain
//! decay. Each has a plain-Rust twin so it can be tested natively.

use filt3r::diagnostics::transition_timeline;
use filt3r::sim::{AttentionScenario, Transition};
use filt3r::theory::{static_gain, static_variance, steady_state};
use filt3r::{evaluate, generate, FilterConfig, StreamScenario, UpdatePolicy};
use wasm_bindgen::prelude::*;

/// Per-frame series from one simulated run. Frame 1 is the initialization
/// frame: gain 1, process noise 0, drift score 0.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Simulation {
    rmse: Vec<f64>,
    gain: Vec<f64>,
    process_noise: Vec<f64>,
    score: Vec<f64>,
    smoothed_score: Vec<f64>,
    threshold: f64,
    windows: Vec<f64>,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(getter)]
    pub fn rmse(&self) -> Vec<f64> {
        self.rmse.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn gain(&self) -> Vec<f64> {
        self.gain.clone()
    }
    #[wasm_bindgen(getter, js_name = processNoise)]
    pub fn process_noise(&self) -> Vec<f64> {
        self.process_noise.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn score(&self) -> Vec<f64> {
        self.score.clone()
    }
    #[wasm_bindgen(getter, js_name = smoothedScore)]
    pub fn smoothed_score(&self) -> Vec<f64> {
        self.smoothed_score.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
    /// Detected transition windows flattened as `[start, end, start, end, ...]`.
    #[wasm_bindgen(getter)]
    pub fn windows(&self) -> Vec<f64> {
        self.windows.clone()
    }
}

/// Parameters of the synthetic stream driven from the page.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamParams {
    pub seed: u64,
    pub length: usize,
    pub measurement_std: f64,
    pub transition_frame: u64,
    pub transition_magnitude: f64,
}

pub fn simulate_native(policy_json: &str, params: StreamParams) -> Result<Simulation, String> {
    let policy: UpdatePolicy = serde_json::from_str(policy_json).map_err(|e| format!("policy: {e}"))?;
    policy.validate().map_err(|e| e.to_string())?;
    let transitions = if params.transition_frame >= 2 && params.transition_magnitude > 0.0 {
        vec![Transition { frame: params.transition_frame, magnitude: params.transition_magnitude }]
    } else {
        Vec::new()
    };
    let scenario = StreamScenario {
        n_tokens: 16,
        dim: 4,
        length: params.length,
        base_process_std: 0.0,
        measurement_std: params.measurement_std,
        transitions,
        seed: params.seed,
        attention: policy.needs_attention().then(AttentionScenario::default),
    };
    let trace = generate(&scenario).map_err(|e| e.to_string())?;
    let report = evaluate(&trace, &policy, &FilterConfig::default()).map_err(|e| e.to_string())?;

    let mut gain = vec![1.0];
    let mut process_noise = vec![0.0];
    let mut score = vec![0.0];
    for d in &report.diagnostics {
        gain.push(d.mean_gain);
        process_noise.push(d.mean_process_noise);
        score.push(d.mean_drift_score);
    }
    let (smoothed_score, threshold, windows) = if report.diagnostics.is_empty() {
        (vec![0.0], 0.0, Vec::new())
    } else {
        let timeline = transition_timeline(&report.diagnostics).map_err(|e| e.to_string())?;
        let mut smoothed = vec![0.0];
        smoothed.extend(&timeline.smoothed);
        let windows = timeline.windows.iter().flat_map(|&(a, b)| [a as f64, b as f64]).collect();
        (smoothed, timeline.threshold, windows)
    };
    Ok(Simulation { rmse: report.rmse, gain, process_noise, score, smoothed_score, threshold, windows })
}

/// Runs `policy_json` (e.g. `{"kind":"fixed-beta","beta":0.05}`) over a
/// 16-token, 4-dimensional static scene with an optional abrupt transition.
#[wasm_bindgen]
pub fn simulate(
    policy_json: &str,
    seed: u32,
    length: u32,
    measurement_std: f64,
    transition_frame: u32,
    transition_magnitude: f64,
) -> Result<Simulation, JsError> {
    let params = StreamParams {
        seed: seed.into(),
        length: length as usize,
        measurement_std,
        transition_frame: transition_frame.into(),
        transition_magnitude,
    };
    simulate_native(policy_json, params).map_err(|e| JsError::new(&e))
}

/// Steady-state gain k* for `points` log-spaced ratios q/r in
/// `[ratio_lo, ratio_hi]`, returned as `[ratio, k*, ratio, k*, ...]`.
#[wasm_bindgen(js_name = steadyStateCurve)]
pub fn steady_state_curve(ratio_lo: f64, ratio_hi: f64, points: u32) -> Vec<f64> {
    if !(ratio_lo > 0.0 && ratio_hi >= ratio_lo) || points == 0 {
        return Vec::new();
    }
    let (lo, hi) = (ratio_lo.ln(), ratio_hi.ln());
    let steps = points.max(2) - 1;
    (0..points)
        .flat_map(|i| {
            let ratio = (lo + (hi - lo) * i as f64 / steps as f64).exp();
            [ratio, steady_state(ratio, 1.0).k_star]
        })
        .collect()
}

/// Static-scene gain and posterior variance for frames `1..=frames`,
/// returned as `[k_1, p_1, k_2, p_2, ...]`.
#[wasm_bindgen(js_name = staticGainCurve)]
pub fn static_gain_curve(p0: f64, r: f64, frames: u32) -> Vec<f64> {
    if !(p0 > 0.0 && r > 0.0) {
        return Vec::new();
    }
    (1..=u64::from(frames))
        .flat_map(|t| [static_gain(t, p0, r), static_variance(t, p0, r)])
        .collect()
}
