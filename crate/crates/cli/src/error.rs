use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(#[from] clap::Error),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] basket_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            CliError::Input(_) => 2,
            CliError::Core(basket_core::Error::Infeasible { .. }) => 4,
            CliError::Core(_) => 3,
            CliError::Io(_) | CliError::Csv(_) => 5,
        }
    }
}
