use std::path::PathBuf;

/// Failures of the command-line layer, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },

    #[error("numerical failure: {0}")]
    Numerical(#[from] lchs_vqs_core::Error),
}

impl CliError {
    /// 2 for bad input or configuration, 3 for failures during computation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } | CliError::Read { .. } => 2,
            CliError::Write { .. } | CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Reclassifies a core error raised while validating input as a config error.
pub(crate) fn invalid<T>(r: lchs_vqs_core::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::Config(e.to_string()))
}
