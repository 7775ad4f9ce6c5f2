use std::fmt;

use ratefit_core::Error as CoreError;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed config or data file (exit 2).
    Schema(String),
    /// The physics or an estimator rejected the input (exit 3).
    Physics(String),
    /// A fit did not converge; its partial result was written (exit 4).
    NotConverged(String),
    /// One or more pipeline rows failed; the report was written (exit 5).
    RowsFailed(Vec<String>),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Physics(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::RowsFailed(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "schema error: {m}"),
            CliError::Physics(m) => write!(f, "physics error: {m}"),
            CliError::NotConverged(m) => write!(f, "fit did not converge: {m}"),
            CliError::RowsFailed(rows) => write!(f, "pipeline rows failed: {}", rows.join(", ")),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Physics(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
