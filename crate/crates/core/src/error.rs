use thiserror::Error;

/// Errors produced by the upsampling operators and their tooling.
#[derive(Debug, Error)]
pub enum UsuError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("scorer failed at depth {depth}: {source}")]
    Scorer {
        depth: usize,
        #[source]
        source: Box<UsuError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = UsuError> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsuError::InvalidArgument(msg.into()))
}
