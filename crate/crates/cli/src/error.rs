use std::process::ExitCode;

/// Failure of a command, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or settings (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Unreadable, unwritable or malformed data (exit 2).
    #[error("{0}")]
    Data(String),
    /// Divergence or a failed numerical check (exit 3).
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        })
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> CliError {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<convemo::Error> for CliError {
    fn from(err: convemo::Error) -> Self {
        use convemo::Error as E;
        let msg = err.to_string();
        match err {
            E::Config(_) => CliError::Usage(msg),
            E::Parse { .. } | E::Data { .. } | E::Split { .. } | E::Io(_) | E::Json(_) => CliError::Data(msg),
            E::ShapeMismatch { .. }
            | E::InvalidMatrix(_)
            | E::NonFiniteGradient(_)
            | E::Diverged { .. }
            | E::NonDeterministic { .. } => CliError::Numeric(msg),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Data(err.to_string())
    }
}
