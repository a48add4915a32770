use filt3r::config::VerificationHooks;
use filt3r::diagnostics::{timeline_from_scores, trailing_mean};
use filt3r::filter::{compute_gain, fuse_state, update_variance_joseph};
use filt3r::noise::{adaptive_measurement_noise, process_noise, AdaptiveRParams, AttentionSummary};
use filt3r::{init_state, step, theory, FilterConfig, TokenMatrix, VarianceVector};
use proptest::prelude::*;

fn matrix(n: usize, d: usize) -> impl Strategy<Value = TokenMatrix> {
    prop::collection::vec(-50.0..50.0f64, n * d).prop_map(move |v| TokenMatrix::new(n, d, v).unwrap())
}

fn stream() -> impl Strategy<Value = Vec<TokenMatrix>> {
    (1usize..6, 1usize..5, 2usize..12)
        .prop_flat_map(|(n, d, t)| prop::collection::vec(matrix(n, d), t))
}

proptest! {
    #[test]
    fn gains_stay_in_bounds_and_variance_positive(frames in stream()) {
        let config = FilterConfig::default();
        let mut state = init_state(&frames[0], config.clone()).unwrap();
        for c in &frames[1..] {
            let (next, d) = step(state, c).unwrap();
            prop_assert!(d.gains.iter().all(|k| (config.k_min..=config.k_max).contains(k)));
            prop_assert!(d.process_noise.iter().all(|q| (config.q_min..=config.q_max).contains(q)));
            prop_assert!(next.variance().as_slice().iter().all(|p| *p > 0.0));
            prop_assert!(next.ema_drift().unwrap() >= config.delta_floor);
            state = next;
        }
        prop_assert_eq!(state.frame_index(), frames.len() as u64);
    }

    #[test]
    fn step_is_deterministic(frames in stream()) {
        let state = init_state(&frames[0], FilterConfig::default()).unwrap();
        let a = step(state.clone(), &frames[1]).unwrap();
        let b = step(state, &frames[1]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fused_state_is_convex(prev in matrix(3, 4), cand in matrix(3, 4), k in prop::collection::vec(0.0..=1.0f64, 3)) {
        let out = fuse_state(&prev, &cand, &k).unwrap();
        for ((o, p), c) in out.as_slice().iter().zip(prev.as_slice()).zip(cand.as_slice()) {
            let slack = 1e-12 * (p.abs() + c.abs());
            prop_assert!(*o >= p.min(*c) - slack && *o <= p.max(*c) + slack);
        }
    }

    #[test]
    fn joseph_matches_short_form_at_exact_gain(p in 1e-3..10.0f64, r in 1e-2..10.0f64) {
        let pv = VarianceVector::new(vec![p]).unwrap();
        let k = compute_gain(&pv, r, 0.0, 1.0, 0.0)[0];
        let joseph = update_variance_joseph(&pv, &[k], r).unwrap().as_slice()[0];
        prop_assert!(((joseph - (1.0 - k) * p) / joseph).abs() <= 1e-12);
    }

    #[test]
    fn joseph_never_beats_the_optimal_posterior(p in 1e-3..10.0f64, r in 1e-2..10.0f64, k in 0.0..=1.0f64) {
        // Any gain other than p/(p+r) leaves more uncertainty than the optimum;
        // the short form (1-k)p would undercut it whenever k exceeds the optimum.
        let pv = VarianceVector::new(vec![p]).unwrap();
        let joseph = update_variance_joseph(&pv, &[k], r).unwrap().as_slice()[0];
        let expected = (1.0 - k).powi(2) * p + k * k * r;
        prop_assert!((joseph - expected).abs() <= 1e-12 * expected);
        prop_assert!(joseph >= p * r / (p + r) * (1.0 - 1e-12));
    }

    #[test]
    fn static_precision_accumulates_by_one_over_r(p0 in 0.1..5.0f64, r in 0.1..5.0f64) {
        let c = TokenMatrix::new(1, 1, vec![1.0]).unwrap();
        let mut state = init_state(&c, FilterConfig::idealized(p0, r, 0.0)).unwrap();
        let mut prev = p0;
        for t in 1..=200u64 {
            let (next, d) = step(state, &c).unwrap();
            let p = d.posterior_variance[0];
            prop_assert!(p < prev);
            prop_assert!(((1.0 / p - 1.0 / prev) * r - 1.0).abs() < 1e-9);
            prop_assert!((d.gains[0] - theory::static_gain(t, p0, r)).abs() <= 1e-12 * d.gains[0]);
            prev = p;
            state = next;
        }
    }

    #[test]
    fn process_noise_is_increasing(a in 0.0..6.0f64, b in 0.0..6.0f64) {
        let q = process_noise(&[a.min(b), a.max(b)], &FilterConfig::default());
        prop_assert!(q[0] <= q[1]);
        // strict where the sigmoid is not saturated
        if (a - b).abs() > 1e-3 && a.min(b) > 1.5 && a.max(b) < 4.5 {
            prop_assert!(q[0] < q[1]);
        }
    }

    #[test]
    fn adaptive_noise_is_bounded_and_monotone(weights in prop::collection::vec(0.01..5.0f64, 2 * 8), ema in 0.2..1.0f64) {
        let att = AttentionSummary::new(2, 8, weights).unwrap();
        let params = AdaptiveRParams::default();
        let h = att.normalized_entropy(params.epsilon);
        prop_assert!(h.iter().all(|v| (-1e-6..=1.0 + 1e-6).contains(v)));
        let (r, _) = adaptive_measurement_noise(&att, Some(ema), &params);
        prop_assert!(r.iter().all(|v| (params.r_min..=params.r_min + params.r_scale).contains(v)));
        if h[0] < h[1] {
            prop_assert!(r[0] <= r[1]);
        }
    }

    #[test]
    fn gate_is_scale_free_above_the_floor(frames in stream(), scale in 0.5..20.0f64) {
        let scaled: Vec<TokenMatrix> = frames
            .iter()
            .map(|m| TokenMatrix::new(m.n_tokens(), m.dim(), m.as_slice().iter().map(|v| v * scale).collect()).unwrap())
            .collect();
        let config = FilterConfig { epsilon: 1e-300, delta_floor: 1e-300, ..FilterConfig::default() };
        let mut a = init_state(&frames[0], config.clone()).unwrap();
        let mut b = init_state(&scaled[0], config).unwrap();
        for (x, y) in frames[1..].iter().zip(&scaled[1..]) {
            let (na, da) = step(a, x).unwrap();
            let (nb, db) = step(b, y).unwrap();
            for (g, h) in da.drift_scores.iter().zip(&db.drift_scores) {
                prop_assert!((g - h).abs() <= 1e-9 * (1.0 + g.abs()));
            }
            for (p, q) in da.process_noise.iter().zip(&db.process_noise) {
                prop_assert!((p - q).abs() <= 1e-7);
            }
            a = na;
            b = nb;
        }
    }

    #[test]
    fn unroll_weights_form_a_distribution(gains in prop::collection::vec(0.0..=1.0f64, 0..60)) {
        let w = theory::unroll_weights(&gains);
        prop_assert!(w.iter().all(|v| *v >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fixed_point_iteration_contracts(q in 1e-3..10.0f64, r in 1e-2..10.0f64, p0 in 0.0..100.0f64) {
        let ss = theory::steady_state(q, r);
        prop_assert!(ss.quadratic_residual().abs() < 1e-12);
        prop_assert!(ss.k_star > 0.0 && ss.k_star < 1.0);
        let p = theory::iterate_fixed_point(p0, q, r, 20_000);
        prop_assert!((p - ss.p_star).abs() <= 1e-10);
    }

    #[test]
    fn smoothing_and_windows(scores in prop::collection::vec(0.0..10.0f64, 1..200)) {
        let smoothed = trailing_mean(&scores, 11);
        let mut running_max = f64::NEG_INFINITY;
        for (s, v) in smoothed.iter().zip(&scores) {
            running_max = running_max.max(*v);
            prop_assert!(*s <= running_max * (1.0 + 1e-12));
        }
        let frames: Vec<u64> = (1..=scores.len() as u64).collect();
        let tl = timeline_from_scores(&frames, &scores).unwrap();
        for pair in tl.windows.windows(2) {
            prop_assert!(pair[0].1 + 1 < pair[1].0, "adjacent windows {:?}", pair);
        }
        for (i, s) in tl.smoothed.iter().enumerate() {
            prop_assert_eq!(*s > tl.threshold, tl.contains_frame(frames[i]));
        }
    }
}

#[test]
fn idealized_hook_switches_everything_off() {
    let c = FilterConfig::idealized(2.0, 0.5, 0.0);
    assert_eq!(
        c.hooks,
        VerificationHooks {
            disable_clamps: true,
            disable_epsilon: true,
            forced_q: Some(0.0)
        }
    );
    assert_eq!(c.effective_epsilon(), 0.0);
}
