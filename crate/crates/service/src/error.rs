use serde::Serialize;

/// Error returned by the engine and rendered as `{"error": {...}}` over HTTP.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: 400,
            code: "bad_request",
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: 404,
            code: "not_found",
            message: message.into(),
        }
    }

    pub fn out_of_range(message: impl Into<String>) -> Self {
        ApiError {
            status: 422,
            code: "out_of_range",
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError {
            status: 500,
            code: "internal",
            message: message.into(),
        }
    }
}

impl From<gridpulse::Error> for ApiError {
    fn from(e: gridpulse::Error) -> Self {
        use gridpulse::Error as E;
        let message = e.to_string();
        match e {
            E::UnknownId { .. } => ApiError::not_found(message),
            E::InvalidArgument(_) | E::Nyquist(_) | E::Topology(_) | E::Generation(_) => ApiError::bad_request(message),
            E::OutOfRange(_) => ApiError::out_of_range(message),
            E::Format(_) | E::Integrity(_) | E::Io(_) | E::Json(_) => ApiError::internal(message),
        }
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;
