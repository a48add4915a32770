//! Closed-form references for the scalar recursion. Written directly from
//! the algebra, sharing no code with [`crate::filter`], so agreement between
//! the two is evidence rather than tautology.

use crate::error::{Error, Result};
use crate::matrix::TokenMatrix;

/// Steady-state operating point of the scalar random walk under constant
/// process noise `q` and measurement noise `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub p_star: f64,
    pub k_star: f64,
    pub q: f64,
    pub r: f64,
}

impl SteadyState {
    /// `p*² + q p* - q r`, zero at the fixed point.
    pub fn quadratic_residual(&self) -> f64 {
        self.p_star * self.p_star + self.q * self.p_star - self.q * self.r
    }
}

/// Gain at frame `t` of the static, noise-free recursion: `1 / (t + r/p0)`.
pub fn static_gain(t: u64, p0: f64, r: f64) -> f64 {
    1.0 / (t as f64 + r / p0)
}

/// Posterior variance after `t` static frames: `1 / (1/p0 + t/r)`.
pub fn static_variance(t: u64, p0: f64, r: f64) -> f64 {
    1.0 / (1.0 / p0 + t as f64 / r)
}

pub fn steady_state(q: f64, r: f64) -> SteadyState {
    let disc = (q * q + 4.0 * q * r).sqrt();
    // (disc - q) / 2, rationalized to avoid cancellation when q >> r
    let p_star = 2.0 * q * r / (disc + q);
    SteadyState {
        p_star,
        k_star: (disc + q) / (disc + q + 2.0 * r),
        q,
        r,
    }
}

/// The steady-state gain once process noise settles at its lower bound.
pub fn gain_floor(q_min: f64, r: f64) -> f64 {
    steady_state(q_min, r).k_star
}

/// One step of the variance map `f(p) = r (p + q) / (p + q + r)`.
pub fn riccati_map(p: f64, q: f64, r: f64) -> f64 {
    r * (p + q) / (p + q + r)
}

/// `f'(p) = r² / (p + q + r)²`.
pub fn riccati_map_derivative(p: f64, q: f64, r: f64) -> f64 {
    let d = p + q + r;
    r * r / (d * d)
}

/// Iterates the variance map `steps` times from `p0`.
pub fn iterate_fixed_point(p0: f64, q: f64, r: f64, steps: usize) -> f64 {
    (0..steps).fold(p0, |p, _| riccati_map(p, q, r))
}

/// Weights of the unrolled smoother: entry 0 is the survival weight of the
/// initial state, entry `τ` the weight of candidate `τ` (1-based).
pub fn unroll_weights(gains: &[f64]) -> Vec<f64> {
    let t = gains.len();
    let mut weights = vec![0.0; t + 1];
    // suffix products of (1 - β_u) for u > τ
    let mut survival = 1.0;
    for tau in (1..=t).rev() {
        weights[tau] = gains[tau - 1] * survival;
        survival *= 1.0 - gains[tau - 1];
    }
    weights[0] = survival;
    weights
}

/// Evaluates the state after `candidates.len()` updates as an explicit
/// weighted sum over the initial state and every candidate.
pub fn unroll_state(initial: &TokenMatrix, candidates: &[TokenMatrix], gains: &[Vec<f64>]) -> Result<TokenMatrix> {
    if candidates.len() != gains.len() {
        return Err(Error::Shape(format!(
            "{} candidates but {} gain vectors",
            candidates.len(),
            gains.len()
        )));
    }
    let (n, d) = initial.shape();
    if let Some(bad) = candidates.iter().find(|c| c.shape() != (n, d)) {
        return Err(Error::Shape(format!("candidate shape {:?} != {:?}", bad.shape(), (n, d))));
    }
    if gains.iter().any(|g| g.len() != n) {
        return Err(Error::Shape(format!("every gain vector must have length {n}")));
    }
    let mut out = vec![0.0; n * d];
    let mut token_gains = vec![0.0; gains.len()];
    for i in 0..n {
        for (slot, g) in token_gains.iter_mut().zip(gains) {
            *slot = g[i];
        }
        let w = unroll_weights(&token_gains);
        let row = &mut out[i * d..(i + 1) * d];
        for (x, v) in row.iter_mut().zip(initial.row(i)) {
            *x = w[0] * v;
        }
        for (tau, c) in candidates.iter().enumerate() {
            for (x, v) in row.iter_mut().zip(c.row(i)) {
                *x += w[tau + 1] * v;
            }
        }
    }
    TokenMatrix::new(n, d, out)
}
