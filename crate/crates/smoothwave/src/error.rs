use thiserror::Error;

/// Failure of a command, carrying its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub(crate) fn io(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl From<smoothwave_core::Error> for CliError {
    fn from(e: smoothwave_core::Error) -> Self {
        match e {
            smoothwave_core::Error::Invalid(field, message) => CliError::Validation {
                field: field.to_string(),
                message,
            },
            other => CliError::Numerical(other.to_string()),
        }
    }
}
