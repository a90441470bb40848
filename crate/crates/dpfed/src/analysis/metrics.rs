//! Per-round metrics and their CSV encoding.
//!
//! One [`RoundRecord`] is emitted per round with a fixed column set, so
//! downstream tooling can concatenate and diff runs textually. Floats are
//! written with Rust's shortest round-trip formatting; infinities print
//! as `inf`.

use crate::vector;

/// CSV header matching [`RoundRecord::to_csv_row`].
pub const METRIC_HEADER: &str =
    "round,suboptimality,snr,cohort_size,u_mean,u_min,u_max,clip_active_fraction,eta";

/// Metrics of one server round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Global objective minus its optimum (the raw objective when the
    /// optimum is unknown).
    pub suboptimality: f64,
    /// `||sum of sent updates|| / ||sum of added noise||`; infinite for
    /// noiseless runs.
    pub snr: f64,
    pub cohort_size: usize,
    /// Mean, min, max of the cohort's raw update norms (0 when empty).
    pub u_mean: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Fraction of the cohort whose update norm exceeded the sensitivity
    /// scale (0 for unbounded-sensitivity runs).
    pub clip_active_fraction: f64,
    pub eta: f64,
}

impl RoundRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.round,
            self.suboptimality,
            self.snr,
            self.cohort_size,
            self.u_mean,
            self.u_min,
            self.u_max,
            self.clip_active_fraction,
            self.eta
        )
    }
}

/// Signal-to-noise ratio of one aggregated round: the norm of the summed
/// signal over the norm of the summed noise. A zero-noise round is
/// infinitely clean; `0/0` is reported as infinite too, since no noise
/// was added.
pub fn snr(signal: &[f64], noise: &[f64]) -> f64 {
    assert_eq!(signal.len(), noise.len(), "snr needs equal dimensions");
    let noise_norm = vector::norm(noise);
    if noise_norm == 0.0 {
        f64::INFINITY
    } else {
        vector::norm(signal) / noise_norm
    }
}
