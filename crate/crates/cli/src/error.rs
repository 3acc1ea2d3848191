use thiserror::Error;

/// Errors surfaced by the command-line front end, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing configuration; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// Failure while running a command; exit code 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<mrfsel::Error> for CliError {
    fn from(e: mrfsel::Error) -> Self {
        CliError::runtime(e)
    }
}
