use std::path::{Path, PathBuf};

/// Failures of the command-line layer, each mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration at `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// An input file is missing, unreadable or malformed.
    #[error("{}: {reason}", path.display())]
    Input { path: PathBuf, reason: String },

    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] reprocs_core::Error),

    /// Some runs failed; their partial results were written.
    #[error("{failed} of {total} runs failed; partial results were written")]
    RunsFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn input(path: &Path, reason: impl ToString) -> Self {
        CliError::Input {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }

    pub fn output(path: &Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for anything wrong with the inputs, 3 for failures while running or
    /// writing results.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Input { .. } => 2,
            CliError::Core(reprocs_core::Error::InvalidParameter { .. } | reprocs_core::Error::DimensionMismatch { .. }) => 2,
            CliError::Output { .. } | CliError::Core(_) | CliError::RunsFailed { .. } => 3,
        }
    }
}
