use std::process::ExitCode;

/// CLI failure modes, mapped onto the process exit codes: usage, config,
/// and data problems exit 2; numeric divergence exits 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Numeric(_) => ExitCode::from(3),
            _ => ExitCode::from(2),
        }
    }
}

impl From<bcdm_core::Error> for CliError {
    fn from(e: bcdm_core::Error) -> CliError {
        match e {
            bcdm_core::Error::NonFinite(msg) => CliError::Numeric(msg),
            bcdm_core::Error::InvalidArgument(msg) => CliError::Data(msg),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
