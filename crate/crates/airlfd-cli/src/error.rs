use std::path::Path;

use airlfd::airlcore::AirlError;
use airlfd::baselines::BaselineError;
use airlfd::detector::DetectError;
use airlfd::evalkit::EvalError;
use airlfd::numcore::NumError;
use airlfd::signalio::SignalError;
use airlfd::synthrig::SynthError;
use thiserror::Error;

use crate::config::ConfigError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> CliError {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Data(format!("missing file: {}", path.display()))
        } else {
            CliError::Data(format!("{}: {e}", path.display()))
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::BadMode(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::BadConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<AirlError> for CliError {
    fn from(e: AirlError) -> Self {
        match e {
            AirlError::BadConfig(_) => CliError::Usage(e.to_string()),
            AirlError::NonFinite(_) | AirlError::Num(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::BadConfig(_) => CliError::Usage(e.to_string()),
            BaselineError::Num(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        match e {
            DetectError::BadParameter(_) | DetectError::UnknownMethod(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}
