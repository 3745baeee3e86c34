use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use evalkit_core::collection::CollectionError;
use evalkit_core::lifecycle::EngineError;
use evalkit_core::persistence::PersistenceError;
use serde::{Deserialize, Serialize};

/// Error body: `{"error": "<kind>", "message": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
        }
    }

    pub fn auth_required() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "authRequired",
            "a valid session is required",
        )
    }

    pub fn forbidden(message: impl Into<String>) -> Self {
        Self::new(StatusCode::FORBIDDEN, "notAuthorized", message)
    }

    pub fn not_found(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, kind, message)
    }

    pub fn bad_request(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, kind, message)
    }

    pub fn conflict(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, kind, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.kind.to_owned(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

pub fn engine_status(e: &EngineError) -> StatusCode {
    use EngineError::*;
    match e {
        NotAuthorized(_) => StatusCode::FORBIDDEN,
        UnknownTeam(_) | UnknownTask(_) | UnknownTemplate(_) | UnknownRequest(_)
        | UnknownAnswer(_) => StatusCode::NOT_FOUND,
        NoActiveTask => StatusCode::PRECONDITION_FAILED,
        LimitExceeded { .. } => StatusCode::TOO_MANY_REQUESTS,
        WrongState(_)
        | TaskStillActive
        | TasksStillActive(_)
        | AlreadyPlayed(_)
        | DuplicateAnswer(_)
        | WouldEndInPast { .. }
        | NotAssigned(_)
        | AlreadyJudged(_) => StatusCode::CONFLICT,
        InvalidTemplate(_) | MalformedAnswer(_) | Judgement(_) => StatusCode::BAD_REQUEST,
        Storage(_) | Apply(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        Self::new(engine_status(&e), e.kind(), e.to_string())
    }
}

impl From<CollectionError> for ApiError {
    fn from(e: CollectionError) -> Self {
        match e {
            CollectionError::NotFound(_) => Self::not_found("notFound", e.to_string()),
            CollectionError::InvalidRange { .. } => Self::new(
                StatusCode::RANGE_NOT_SATISFIABLE,
                "invalidRange",
                e.to_string(),
            ),
            CollectionError::DuplicateItemName { .. } => {
                Self::bad_request("duplicateItemName", e.to_string())
            }
            CollectionError::PathUnreadable { .. } => {
                Self::bad_request("pathUnreadable", e.to_string())
            }
            CollectionError::Io(_) => Self::internal(e.to_string()),
        }
    }
}

impl From<PersistenceError> for ApiError {
    fn from(e: PersistenceError) -> Self {
        match e {
            PersistenceError::UnknownEvaluation(_) => {
                Self::not_found("unknownEvaluation", e.to_string())
            }
            PersistenceError::Storage(_) => Self::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "storageFailure",
                e.to_string(),
            ),
            _ => Self::internal(e.to_string()),
        }
    }
}
