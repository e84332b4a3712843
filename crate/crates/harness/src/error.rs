use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("solver error: {0}")]
    Solver(#[from] caputo_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("report error: {0}")]
    Report(String),
}

impl HarnessError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config { path: path.into(), message: message.into() }
    }

    /// Process exit status: 2 for configuration problems, 3 for everything the
    /// numerics or the file system reject.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Report(_) => 2,
            HarnessError::Solver(_) | HarnessError::Io { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
