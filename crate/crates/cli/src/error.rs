use thiserror::Error;
use twinmarket::Error as CoreError;

/// Exit status 1 for bad input, 2 when the request is well-formed but
/// cannot be met.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => 1,
            CliError::Domain(_) => 2,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::InvalidBand(_)
            | CoreError::InvalidSamples(_)
            | CoreError::InvalidPrices(_)
            | CoreError::InvalidConfig(_)
            | CoreError::ReturnOutOfRange { .. } => CliError::Input(err.to_string()),
            CoreError::SingularSystem { .. }
            | CoreError::NotWithinEpsilon { .. }
            | CoreError::InvalidMagnitude { .. }
            | CoreError::DegenerateSpread { .. }
            | CoreError::DepthTooLarge { .. }
            | CoreError::RoundedToZero { .. } => CliError::Domain(err.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
