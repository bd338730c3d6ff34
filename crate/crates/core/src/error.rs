use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: String },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("oscillation frequency {0} Hz is not below the 15 Hz Nyquist limit")]
    Nyquist(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("requested range is outside stored data: {0}")]
    OutOfRange(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn unknown(kind: &'static str, id: impl ToString) -> Self {
        Error::UnknownId {
            kind,
            id: id.to_string(),
        }
    }

    pub fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
