use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad flags or an inconsistent experiment spec; reported before any
    /// compute.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] s2cd::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{path}, line {line}: {message}")]
    Trace { path: String, line: usize, message: String },

    #[error("incompatible trace files: {0}")]
    Incompatible(String),
}

impl HarnessError {
    pub fn usage(msg: impl Into<String>) -> Self {
        HarnessError::Usage(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 2 for usage and validation errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Solver(s2cd::Error::InvalidParameter(_)) => 2,
            _ => 1,
        }
    }
}
