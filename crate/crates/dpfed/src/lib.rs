//! Deterministic simulator and analysis toolkit for differentially
//! private federated optimization.
//!
//! The crate simulates three federated algorithms over a shared engine:
//! a non-private FedAvg baseline, private FedAvg with per-client update
//! clipping, and private FedAvg with per-client update normalization,
//! each with calibrated Gaussian noise under a client-level
//! `(epsilon, delta)` budget. Around the engine sit the pieces needed to
//! study them: synthetic convex problem suites, closed-form convergence
//! bounds with their empirical counterparts, descent-inequality checks,
//! signal-to-noise metrics, and 2-D trajectory projections.
//!
//! Determinism is a design constraint throughout: every random draw comes
//! from a named stream ([`stream::StreamKey`]), reductions happen in fixed
//! order, and parallelism never changes results.

pub mod analysis;
pub mod error;
pub mod fedopt;
pub mod objectives;
pub mod privacy;
pub mod stream;
pub mod vector;

pub use error::{Error, Result};
