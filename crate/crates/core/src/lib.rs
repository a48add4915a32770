//! Adaptive per-token Kalman filtering of recurrent latent states.
//!
//! A streaming model emits a candidate latent state every frame. Instead of
//! overwriting its memory, the filter treats the candidate as a noisy
//! measurement and fuses it with a per-token gain derived from a propagated
//! variance. Process noise is gated by how unusual the current candidate
//! drift is relative to a running baseline, so gains shrink in stable
//! stretches and reopen at scene transitions.
//!
//! - [`filter`]: the recursion itself
//! - [`noise`]: drift scoring and the process-noise gate
//! - [`policy`]: the full filter and its ablation variants
//! - [`theory`]: closed-form references used as test oracles
//! - [`sim`]: synthetic streams with ground truth
//! - [`diagnostics`]: transition timelines, gain windows, update ratio
//! - [`harness`] / [`io`]: config-driven runs and file formats
//! - [`acceptance`]: the executable acceptance criteria

pub mod acceptance;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod filter;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod noise;
pub mod policy;
pub mod sim;
pub mod theory;

pub use config::FilterConfig;
pub use error::{Error, Result};
pub use filter::{init_state, step, FilterState, StepDiagnostics};
pub use matrix::{TokenMatrix, VarianceVector};
pub use noise::AttentionSummary;
pub use policy::{policy_step, UpdatePolicy};
pub use sim::{evaluate, generate, EvaluationReport, StreamScenario, StreamTrace};
