//! Analysis of finished runs: per-round metrics, closed-form bound
//! evaluation, descent-inequality verification, and trajectory plots.

pub mod bounds;
pub mod lemmas;
pub mod metrics;
pub mod projection;

pub use bounds::{
    empirical_clip_lhs, empirical_norm_lhs, geometric_sum_check, suggested_step_sensitivity, clip_bound,
    simplified_clip_bound, norm_bound, BoundInputs, ClipBound, NormBound,
};
pub use lemmas::{lemma_suite, sample_trajectories, LemmaReport, TrajectorySample};
pub use metrics::{snr, RoundRecord, METRIC_HEADER};
pub use projection::{trajectory_projection_2d, Projection2d};
