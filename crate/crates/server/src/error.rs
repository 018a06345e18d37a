use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use stance_scope::ingest::{ProviderError, QueryError};

/// An error response: `{"error": {"code", "message", "position"?}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub position: Option<usize>,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
            position: None,
        }
    }

    pub fn model_unavailable() -> Self {
        ApiError {
            status: StatusCode::SERVICE_UNAVAILABLE,
            code: "model_unavailable",
            message: "no model checkpoint is loaded".into(),
            position: None,
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
            message: message.into(),
            position: None,
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            code: "query_parse",
            message: e.message,
            position: Some(e.position),
        }
    }
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        let code = match e {
            ProviderError::Auth { .. } => "provider_auth",
            ProviderError::Timeout(_) => "provider_timeout",
            _ => "provider_error",
        };
        ApiError {
            status: StatusCode::BAD_GATEWAY,
            code,
            message: e.to_string(),
            position: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({"code": self.code, "message": self.message});
        if let Some(p) = self.position {
            error["position"] = json!(p);
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}
