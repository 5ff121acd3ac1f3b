use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or contradictory flags, unknown columns, malformed CLI input.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] hippoprog::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(hippoprog::Error::Csv(e))
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
