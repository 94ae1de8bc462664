use thiserror::Error;

/// Errors of the experiment harness.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] isq_core::Error),
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
