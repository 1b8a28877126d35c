use thiserror::Error;

/// Failure of a CLI run. Validation problems and statistical failures map
/// to distinct exit codes.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error("statistical check failed: {0}")]
    Statistical(String),
    #[error("{0}")]
    Core(gridfold_core::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format: {0}")]
    Format(String),
}

impl RunError {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        RunError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 0 is success, 1 a validation or input problem, 2 a failed statistical check.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Statistical(_) => 2,
            RunError::Core(gridfold_core::Error::LawViolation(_)) => 2,
            _ => 1,
        }
    }
}

impl From<gridfold_core::Error> for RunError {
    fn from(e: gridfold_core::Error) -> Self {
        match e {
            gridfold_core::Error::InvalidParameter { field, reason } => RunError::Invalid {
                field: field.into(),
                reason,
            },
            other => RunError::Core(other),
        }
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Format(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Format(e.to_string())
    }
}
