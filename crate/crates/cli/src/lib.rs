//! Command-line front end for `gameda`: experiment configs, game documents
//! and the batch runner.

pub mod config;
pub mod document;
pub mod harness;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Assertion(_) => 4,
        }
    }
}

impl From<gameda::Error> for CliError {
    fn from(e: gameda::Error) -> Self {
        match e {
            gameda::Error::NumericAbort { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
