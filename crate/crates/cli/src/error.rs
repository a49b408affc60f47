use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse failure: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] skewreg_core::Error),
}

impl CliError {
    /// Configuration and environment problems exit with 2; anything raised while
    /// running an experiment exits with 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}
