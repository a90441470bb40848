//! Harness-level error type and its mapping to process exit codes.

use thiserror::Error;

/// Convenience alias used across the harness.
pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration value was rejected; the message names the key.
    #[error("config: {0}")]
    Config(String),

    /// The configuration file failed to parse; the message carries the
    /// parser's line and column markers.
    #[error("config parse error in {path}:\n{message}")]
    Parse { path: String, message: String },

    /// A verification suite found violations.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Core(#[from] dpfed::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 3 for configuration problems (including
    /// infeasible budgets and bad suite geometry), 2 for diverged runs,
    /// 1 for anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } => 3,
            CliError::Core(core) => match core {
                dpfed::Error::Diverged { .. } => 2,
                dpfed::Error::InvalidConfig(_)
                | dpfed::Error::InvalidBudget(_)
                | dpfed::Error::NTooSmall { .. }
                | dpfed::Error::BoundPrecondition(_)
                | dpfed::Error::ShardDivisibility { .. }
                | dpfed::Error::ShardClasses { .. } => 3,
                _ => 1,
            },
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_separate_config_divergence_and_misc() {
        assert_eq!(CliError::Config("n: bad".into()).exit_code(), 3);
        assert_eq!(
            CliError::Core(dpfed::Error::NTooSmall { rho: 1.5 }).exit_code(),
            3
        );
        assert_eq!(
            CliError::Core(dpfed::Error::Diverged {
                round: 3,
                client: 1,
                step: 0,
            })
            .exit_code(),
            2
        );
        assert_eq!(
            CliError::Verification("2 violations".into()).exit_code(),
            1
        );
    }
}
