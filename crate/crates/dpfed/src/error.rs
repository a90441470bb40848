//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by simulation, calibration, and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Privacy parameters outside their admissible ranges.
    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    /// The calibration key quantity left the regime where the added noise
    /// is meaningful; the cohort population cannot support the budget.
    #[error(
        "n too small: key quantity rho = {rho:.6} must be below 1 \
         (raise n or epsilon, or lower the dimension)"
    )]
    NTooSmall { rho: f64 },

    /// Mismatched vector dimensions.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A local gradient step produced a non-finite value; carries only the
    /// local step index. The driver wraps it with round and client context.
    #[error("non-finite gradient at local step {step}")]
    NonFiniteGradient { step: usize },

    /// A federated run produced a non-finite iterate or gradient.
    #[error("diverged at round {round}, client {client}, local step {step}")]
    Diverged {
        round: usize,
        client: usize,
        step: usize,
    },

    /// Run or suite parameters violate an engine invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The linear solver stalled on a (numerically) singular system.
    #[error("singular system: residual {residual:.3e} after {iterations} iterations")]
    SingularSystem { residual: f64, iterations: usize },

    /// An iterative solver ran out of iterations before reaching tolerance.
    #[error(
        "solver did not converge: gradient norm {grad_norm:.3e} after {iterations} iterations \
         (tolerance {tolerance:.3e})"
    )]
    NoConvergence {
        grad_norm: f64,
        iterations: usize,
        tolerance: f64,
    },

    /// The sample count does not split into the requested shard grid.
    #[error(
        "cannot shard {samples} samples into {clients} clients x {shards} shards \
         of equal size"
    )]
    ShardDivisibility {
        samples: usize,
        clients: usize,
        shards: usize,
    },

    /// A dealt shard assignment would give some client too many classes.
    #[error(
        "shard assignment gives client {client} data from {distinct} classes, \
         more than its {allowed} shards permit"
    )]
    ShardClasses {
        client: usize,
        distinct: usize,
        allowed: usize,
    },

    /// A feature file failed to parse or failed a consistency check.
    #[error("feature file error at byte {offset}: {message}")]
    FeatureFile { offset: u64, message: String },

    /// A closed-form bound was requested outside its hypotheses.
    #[error("bound precondition violated: {0}")]
    BoundPrecondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
