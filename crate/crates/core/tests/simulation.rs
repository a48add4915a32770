use filt3r::config::VerificationHooks;
use filt3r::diagnostics::percentile;
use filt3r::noise::compute_drift;
use filt3r::sim::{evaluate, generate, StreamScenario, Transition};
use filt3r::{init_state, policy_step, theory, FilterConfig, UpdatePolicy};

fn random_walk(seed: u64, q: f64, length: usize) -> StreamScenario {
    StreamScenario {
        base_process_std: q.sqrt(),
        ..StreamScenario::static_scene(32, 4, length, 1.0, seed)
    }
}

#[test]
fn unit_noise_drift_matches_half_normal_mean() {
    // D = 1: |v_t - v_{t-1}| with v ~ N(0, 1) has mean 2 / sqrt(pi)
    let trace = generate(&StreamScenario::static_scene(1, 1, 100_001, 1.0, 77)).unwrap();
    let total: f64 = trace
        .candidates
        .windows(2)
        .map(|w| compute_drift(&w[1], &w[0]).unwrap().1)
        .sum();
    let mean = total / 100_000.0;
    let expected = 2.0 / std::f64::consts::PI.sqrt();
    assert!((mean / expected - 1.0).abs() < 0.02, "mean drift {mean}, expected {expected}");
}

#[test]
fn candidate_noise_has_requested_std() {
    let trace = generate(&StreamScenario::static_scene(10, 10, 100, 0.3, 5)).unwrap();
    let residuals: Vec<f64> = trace
        .candidates
        .iter()
        .zip(&trace.true_latents)
        .flat_map(|(c, l)| c.as_slice().iter().zip(l.as_slice()).map(|(a, b)| a - b).collect::<Vec<_>>())
        .collect();
    let n = residuals.len() as f64;
    let m = residuals.iter().sum::<f64>() / n;
    let std = (residuals.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / n).sqrt();
    assert!((std / 0.3 - 1.0).abs() < 0.2, "std {std}");
}

#[test]
fn transition_frame_score_stands_out() {
    let scenario = StreamScenario {
        transitions: vec![Transition {
            frame: 50,
            magnitude: 10.0,
        }],
        ..StreamScenario::static_scene(16, 4, 80, 0.1, 3)
    };
    let trace = generate(&scenario).unwrap();
    let report = evaluate(&trace, &UpdatePolicy::Filt3rFull, &FilterConfig::default()).unwrap();
    let score = |f: u64| report.diagnostics.iter().find(|d| d.frame == f).unwrap().mean_drift_score;
    let before: Vec<f64> = (2..50).map(score).collect();
    assert_eq!(before.len(), 48);
    assert!(score(50) > percentile(&before, 90.0));
}

#[test]
fn stable_scene_filter_beats_overwrite() {
    let trace = generate(&StreamScenario::static_scene(16, 4, 500, 1.0, 12)).unwrap();
    let config = FilterConfig::default();
    let filt = evaluate(&trace, &UpdatePolicy::Filt3rFull, &config).unwrap();
    let over = evaluate(&trace, &UpdatePolicy::Overwrite, &config).unwrap();
    assert!(filt.final_rmse() < over.final_rmse());
    assert!((over.final_rmse() - 1.0).abs() < 0.25);
}

fn tail_mse(rmse: &[f64], skip: usize) -> f64 {
    let tail = &rmse[skip..];
    tail.iter().map(|r| r * r).sum::<f64>() / tail.len() as f64
}

#[test]
fn fixed_q_reaches_steady_state_bound_on_matched_walk() {
    let q_bar = 0.26;
    let trace = generate(&random_walk(21, q_bar, 3000)).unwrap();
    let report = evaluate(&trace, &UpdatePolicy::FixedQ { q_bar: None }, &FilterConfig::default()).unwrap();
    let achieved = tail_mse(&report.rmse, 500).sqrt();
    let bound = theory::steady_state(q_bar, 1.0).p_star.sqrt();
    assert!((achieved / bound - 1.0).abs() < 0.05, "rmse {achieved}, bound {bound}");
}

/// Constant-gain filter at the steady-state gain, initialized like the others.
fn oracle_mse(trace: &filt3r::StreamTrace, k: f64) -> f64 {
    let mut s = trace.candidates[0].as_slice().to_vec();
    let mut rmse = Vec::with_capacity(trace.len());
    for (c, truth) in trace.candidates.iter().zip(&trace.true_latents) {
        for (x, y) in s.iter_mut().zip(c.as_slice()) {
            *x += k * (y - *x);
        }
        let sq: f64 = s.iter().zip(truth.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
        rmse.push((sq / s.len() as f64).sqrt());
    }
    tail_mse(&rmse, 200)
}

#[test]
fn no_policy_beats_the_constant_gain_oracle() {
    let q = 0.26;
    let k_star = theory::steady_state(q, 1.0).k_star;
    let policies = [
        UpdatePolicy::Filt3rFull,
        UpdatePolicy::FixedQ { q_bar: None },
        UpdatePolicy::ResetP,
        UpdatePolicy::NoEmaNorm,
        UpdatePolicy::FixedBeta { beta: 0.05 },
        UpdatePolicy::Overwrite,
    ];
    let mut diffs = vec![Vec::new(); policies.len()];
    for seed in 0..20 {
        let trace = generate(&random_walk(500 + seed, q, 600)).unwrap();
        let oracle = oracle_mse(&trace, k_star);
        for (policy, d) in policies.iter().zip(diffs.iter_mut()) {
            let report = evaluate(&trace, policy, &FilterConfig::default()).unwrap();
            d.push(tail_mse(&report.rmse, 200) - oracle);
        }
    }
    for (policy, d) in policies.iter().zip(&diffs) {
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(mean + 2.0 * se >= 0.0, "{policy} beats oracle: mean {mean}, se {se}");
    }
}

#[test]
fn widened_clamps_with_forced_q_reduce_to_fixed_q() {
    let scenario = StreamScenario {
        transitions: vec![Transition {
            frame: 30,
            magnitude: 5.0,
        }],
        ..StreamScenario::static_scene(8, 3, 60, 1.0, 4)
    };
    let trace = generate(&scenario).unwrap();
    let wide = FilterConfig {
        k_min: 0.0,
        k_max: 1.0,
        ..FilterConfig::default()
    };
    let forced = FilterConfig {
        hooks: VerificationHooks {
            forced_q: Some(0.26),
            ..VerificationHooks::default()
        },
        ..wide.clone()
    };
    let full = evaluate(&trace, &UpdatePolicy::Filt3rFull, &forced).unwrap();
    let fixed = evaluate(&trace, &UpdatePolicy::FixedQ { q_bar: Some(0.26) }, &wide).unwrap();
    for (a, b) in full.diagnostics.iter().zip(&fixed.diagnostics) {
        assert_eq!(a.gains, b.gains);
    }
    assert_eq!(full.rmse, fixed.rmse);
}

#[test]
fn reset_p_gain_is_constant_over_fifty_frames() {
    let trace = generate(&StreamScenario::static_scene(4, 2, 51, 1.0, 8)).unwrap();
    let config = FilterConfig {
        hooks: VerificationHooks {
            forced_q: Some(0.1),
            ..VerificationHooks::default()
        },
        ..FilterConfig::default()
    };
    let report = evaluate(&trace, &UpdatePolicy::ResetP, &config).unwrap();
    let expected = (1.5 + 0.1) / (1.5 + 0.1 + 1.0 + 1e-6);
    assert_eq!(report.diagnostics.len(), 50);
    for d in &report.diagnostics {
        for k in &d.gains {
            assert!((k - expected).abs() <= 1e-12 * expected);
        }
    }
}

#[test]
fn periodic_reset_boundaries() {
    let trace = generate(&StreamScenario::static_scene(4, 3, 350, 1.0, 31)).unwrap();
    let policy = UpdatePolicy::periodic_reset(UpdatePolicy::Filt3rFull);
    let mut state = init_state(&trace.candidates[0], FilterConfig::default()).unwrap();
    for (t, cand) in trace.candidates.iter().enumerate().skip(1) {
        let frame = t as u64 + 1;
        let (next, _) = policy_step(&policy, state, cand, None).unwrap();
        if frame % 100 == 1 {
            assert_eq!(next.fused(), cand, "frame {frame}");
            assert!(next.variance().as_slice().iter().all(|p| *p == 1.5));
        }
        state = next;
    }
}

#[test]
fn static_trace_gain_settles_at_floor() {
    let trace = generate(&StreamScenario::static_scene(32, 8, 2000, 1.0, 6)).unwrap();
    let report = evaluate(&trace, &UpdatePolicy::Filt3rFull, &FilterConfig::default()).unwrap();
    let s = filt3r::diagnostics::gain_window_summary(&report.diagnostics, 0.2).unwrap();
    assert!(s.early_mean_gain > s.late_mean_gain);
    assert!((s.late_mean_gain - theory::gain_floor(0.02, 1.0)).abs() <= 0.015);
}
