//! Library side of the command-line pipeline; the binary in `main.rs` is a
//! thin argument parser over these command functions.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod lock;
pub mod svg;

/// Command failures carry the process exit code: 2 config error, 3 missing
/// prerequisite, 4 numeric failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing prerequisite: {0}")]
    Prerequisite(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Prerequisite(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<anchorplan_core::Error> for CliError {
    fn from(e: anchorplan_core::Error) -> Self {
        use anchorplan_core::nn::NnError;
        use anchorplan_core::Error as E;
        let numeric = matches!(&e, E::NonFinite { .. } | E::Nn(NnError::NonFinite { .. }));
        if numeric {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Prerequisite(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
