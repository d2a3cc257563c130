use oee_core::OeeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical or physical obstruction (gap closure, unquantized invariant, ...).
    #[error("{0}")]
    Numerical(OeeError),

    /// A result that computed fine but failed its acceptance check.
    #[error("check failed: {0}")]
    Check(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 0 success, 1 i/o, 2 numerical or physical failure, 3 configuration error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Numerical(_) | CliError::Check(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl From<OeeError> for CliError {
    fn from(e: OeeError) -> Self {
        match e {
            OeeError::InvalidParameter(_) | OeeError::InvalidGrid(_) | OeeError::InvalidPartition(_) => {
                CliError::Config(e.to_string())
            }
            OeeError::Io(m) => CliError::Io(m),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
