use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use qm_adapt::audit::AuditError;
use qm_adapt::engine::EngineError;
use qm_adapt::goal::GoalError;
use qm_adapt::store::StoreError;
use qm_adapt::tailor::TailorError;
use serde::Serialize;
use serde_json::{json, Value};

/// Error response body: `{code, message, details}`.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), details: Value::Null }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn malformed(e: serde_json::Error) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed", e.to_string())
            .with_details(json!({"line": e.line(), "column": e.column()}))
    }

    pub fn not_found(code: &'static str, what: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, code, format!("`{what}` does not exist")).with_details(json!({"id": what}))
    }

    pub fn stale(sent: u64, current: u64) -> Self {
        ApiError::new(StatusCode::CONFLICT, "stale-revision", format!("revision {sent} is stale, session is at {current}"))
            .with_details(json!({"revision": current}))
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::TaskNotFound(id) => ApiError::not_found("task-not-found", &id),
            EngineError::TaskNotOpen { id, status } => ApiError::unprocessable("task-not-open", message)
                .with_details(json!({"taskId": id, "status": status})),
            EngineError::EmptyNote => ApiError::unprocessable("empty-note", message),
            EngineError::NotFound(id) => {
                ApiError::unprocessable("element-not-found", message).with_details(json!({"id": id}))
            }
            EngineError::Model(_) => ApiError::unprocessable("integrity", message),
            EngineError::Replay { .. } | EngineError::Log(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "log", message)
            }
        }
    }
}

impl From<TailorError> for ApiError {
    fn from(e: TailorError) -> Self {
        match e {
            TailorError::Stale { planned, actual } => ApiError::new(
                StatusCode::CONFLICT,
                "stale-plan",
                "the model changed since the tailoring plan was made",
            )
            .with_details(json!({"planned": planned, "actual": actual})),
            TailorError::Engine(e) => e.into(),
        }
    }
}

impl From<GoalError> for ApiError {
    fn from(e: GoalError) -> Self {
        ApiError::unprocessable("invalid-goal", e.to_string())
    }
}

impl From<AuditError> for ApiError {
    fn from(e: AuditError) -> Self {
        ApiError::unprocessable("invalid-audit", e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Engine(e) => e.into(),
            StoreError::Goal { source, .. } => source.into(),
            StoreError::Parse { .. } | StoreError::Schema { .. } | StoreError::Structural { .. } => {
                ApiError::unprocessable("invalid-model", e.to_string())
            }
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()),
        }
    }
}
