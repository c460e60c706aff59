use std::fmt;

use usu_core::UsuError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Domain(String),
    /// A verification ran but did not match the expected outcome.
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Mismatch(_) => EXIT_MISMATCH,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Domain(m) | CliError::Mismatch(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<UsuError> for CliError {
    fn from(e: UsuError) -> Self {
        let msg = e.to_string();
        match e {
            UsuError::InvalidArgument(_) => CliError::Usage(msg),
            UsuError::Io(_) | UsuError::Format(_) => CliError::Io(msg),
            UsuError::Domain(_) | UsuError::UndefinedMetric(_) | UsuError::Scorer { .. } => CliError::Domain(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
