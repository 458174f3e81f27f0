//! CLI error taxonomy and the process exit-code contract: 2 unknown verb
//! (clap's usage-error code), 3 invalid config, 4 IO failure, 5 training
//! divergence.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, bad flag value, or invalid data contents.
    Config(String),
    /// Filesystem failure; carries the path that failed.
    Io(String),
    /// Training produced a non-finite loss.
    Divergence(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> CliError {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    /// One-word machine-parsable category.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Divergence(_) => "divergence",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io(_) => 4,
            CliError::Divergence(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Divergence(m) => m,
        };
        write!(f, "error[{}]: {msg}", self.category())
    }
}

impl std::error::Error for CliError {}

impl From<softle_core::Error> for CliError {
    fn from(err: softle_core::Error) -> CliError {
        match err {
            softle_core::Error::Divergence { .. } => CliError::Divergence(err.to_string()),
            _ => CliError::Config(err.to_string()),
        }
    }
}
