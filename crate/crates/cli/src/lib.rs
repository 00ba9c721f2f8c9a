//! Configuration, suite orchestration and report output for the `lpkin` binary.

pub mod config;
pub mod json;
pub mod suites;

use std::path::PathBuf;

use thiserror::Error;

pub use config::RunConfig;
pub use suites::Suite;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] lpkin_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for usage and input problems, 3 for quadratures that did not
    /// converge, 1 for any other numerical failure.
    pub fn exit_code(&self) -> i32 {
        use lpkin_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Core(E::NonConvergence { .. }) => 3,
            CliError::Core(E::InvalidArgument(_) | E::GridMismatch | E::Io(_)) => 2,
            CliError::Core(E::Domain(_) | E::Unstable { .. }) => 1,
        }
    }
}

pub fn write_file(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
