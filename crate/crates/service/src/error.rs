use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ethica_ar_core::classroom::ClassroomError;
use ethica_ar_core::game::{GameError, Summary};
use ethica_ar_core::progress::StoreError;
use serde::Serialize;

/// Error response body: `{"error": code, "message": text}`.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: &'static str,
    pub message: String,
    /// Attached when a finished session is asked for another question.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            error,
            message: message.into(),
            summary: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn with_summary(mut self, summary: Summary) -> Self {
        self.summary = Some(summary);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

impl From<GameError> for ApiError {
    fn from(e: GameError) -> Self {
        let (status, code) = match &e {
            GameError::UnknownStudent(_) => (StatusCode::NOT_FOUND, "unknown_student"),
            GameError::DuplicateStudent(_) => (StatusCode::CONFLICT, "duplicate"),
            GameError::WrongPhase { .. } => (StatusCode::CONFLICT, "wrong_phase"),
            GameError::SessionComplete => (StatusCode::GONE, "session_complete"),
            GameError::SessionClosed => (StatusCode::CONFLICT, "session_closed"),
            GameError::InvalidConfidence(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            GameError::UnknownQuestion(_) | GameError::AlreadyAsked(_) | GameError::BankMismatch { .. } => {
                (StatusCode::CONFLICT, "conflict")
            }
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::UnknownEntity(_) => (StatusCode::NOT_FOUND, "not_found"),
            StoreError::Duplicate(_) => (StatusCode::CONFLICT, "duplicate"),
            StoreError::Storage(_) => (StatusCode::INTERNAL_SERVER_ERROR, "storage_failure"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "store_error"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<ClassroomError> for ApiError {
    fn from(e: ClassroomError) -> Self {
        match e {
            ClassroomError::UnknownClass(_) | ClassroomError::UnknownSession(_) => {
                Self::new(StatusCode::NOT_FOUND, "not_found", e.to_string())
            }
            ClassroomError::Duplicate(_) => Self::new(StatusCode::CONFLICT, "duplicate", e.to_string()),
            ClassroomError::Game(g) => g.into(),
            ClassroomError::Store(s) => s.into(),
        }
    }
}
