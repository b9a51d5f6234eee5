use subelliptic_core::Error as CoreError;

/// Failures mapped onto process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed configuration (exit 1).
    #[error("configuration error: {0}")]
    Config(String),
    /// A hypothesis check failed (exit 2).
    #[error("hypothesis check failed: {0}")]
    CheckFailed(String),
    /// Solver failure (exit 3).
    #[error("{0}")]
    Solver(String),
    /// File system error (exit 1).
    #[error("{path}: {source}")]
    Io {
        /// Offending path.
        path: String,
        /// Underlying error.
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::CheckFailed(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Configuration(_) | CoreError::Exponent { .. } | CoreError::Contract(_) | CoreError::Data { .. } => {
                CliError::Config(msg)
            }
            CoreError::Hypothesis { .. } | CoreError::NotComparable { .. } => CliError::CheckFailed(msg),
            CoreError::Singular { .. }
            | CoreError::SolverFailure(_)
            | CoreError::Unsolvable { .. }
            | CoreError::Internal(_) => CliError::Solver(msg),
        }
    }
}
