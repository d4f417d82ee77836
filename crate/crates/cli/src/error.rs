use thiserror::Error;

/// Everything a subcommand can fail with, mapped onto the exit-code
/// contract by [`CliError::exit_code`].
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input.
    #[error("{0}")]
    Input(String),

    /// Well-formed input that the requested computation cannot accept.
    #[error("{0}")]
    Semantic(String),

    /// A solver or certificate check failed.
    #[error("{0}")]
    Numerical(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Semantic(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<eor_core::Error> for CliError {
    fn from(e: eor_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Semantic(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
