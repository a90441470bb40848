//! Federated optimization: per-round primitive operations and the
//! deterministic simulation engine that composes them into full runs.

pub mod engine;
pub mod ops;

pub use engine::{run_federated, BoundTrace, RunConfig, RunOutput, SensitivityPolicy};
pub use ops::{
    aggregate_and_step, clip, learning_rate, local_trajectory, local_updates, normalize,
    sample_cohort, LocalUpdate, ScheduleSpec,
};
