use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gaze_core::GazeError;
use serde::Serialize;

use crate::api::SCHEMA_VERSION;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot load model: {0}")]
    Model(#[from] GazeError),
}

/// An error answered to the client as `{schema_version, error: {code, message}}`.
#[derive(Debug, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
    }

    pub fn calibrating() -> Self {
        Self::new(StatusCode::CONFLICT, "calibrating", "session is calibrating")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<GazeError> for ApiError {
    fn from(e: GazeError) -> Self {
        let (status, code) = match &e {
            GazeError::CalibrationAborted(_) => (StatusCode::UNPROCESSABLE_ENTITY, "calibration_aborted"),
            GazeError::Image(_) | GazeError::Parse { .. } => (StatusCode::BAD_REQUEST, "bad_payload"),
            GazeError::InvalidArgument(_) | GazeError::Shape(_) | GazeError::NonFinite(_) | GazeError::WrongSpace { .. } => {
                (StatusCode::BAD_REQUEST, "invalid_argument")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self::new(status, code, e.to_string())
    }
}

#[derive(Serialize)]
struct Body<'a> {
    schema_version: u32,
    error: Detail<'a>,
}

#[derive(Serialize)]
struct Detail<'a> {
    code: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            schema_version: SCHEMA_VERSION,
            error: Detail {
                code: self.code,
                message: &self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}
