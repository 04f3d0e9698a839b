//! Scenario runner for `bendfree-core`: configuration, built-in scenarios,
//! checks, reports and refinement studies.

pub mod config;
pub mod expr;
pub mod run;
pub mod scenarios;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line} ({field}): {message}")]
    Config {
        line: usize,
        field: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{stage}: {source}")]
    Core {
        stage: &'static str,
        #[source]
        source: bendfree_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Tags a core error with the module that raised it.
pub(crate) trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for bendfree_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { stage, source })
    }
}
