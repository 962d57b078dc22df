//! HTTP JSON API over the session store.
//!
//! Every body, including errors, is canonical JSON. Mutations go through
//! the store's single writer; reads share a read lock.

use std::any::Any;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::canonical;
use crate::reporting::{self, Level, ReportError};
use crate::sessions::{Store, StoreError};
use crate::taxonomy::FrameworkSummary;

pub type SharedStore = Arc<RwLock<Store>>;

/// Machine-readable error codes. Each maps to one HTTP status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    InvalidRequest,
    InvalidGrade,
    NotFound,
    UnknownFramework,
    UnknownUser,
    UnknownSession,
    UnknownLeaf,
    MethodNotAllowed,
    SessionFinalized,
    SessionNotFinalized,
    IncompleteAnswers,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            Self::InvalidRequest | Self::InvalidGrade => StatusCode::BAD_REQUEST,
            Self::NotFound
            | Self::UnknownFramework
            | Self::UnknownUser
            | Self::UnknownSession
            | Self::UnknownLeaf => StatusCode::NOT_FOUND,
            Self::MethodNotAllowed => StatusCode::METHOD_NOT_ALLOWED,
            Self::SessionFinalized | Self::SessionNotFinalized => StatusCode::CONFLICT,
            Self::IncompleteAnswers => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Vec<String>>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            details: None,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = match &e {
            StoreError::UnknownUser(_) => ErrorCode::UnknownUser,
            StoreError::UnknownFramework(_) => ErrorCode::UnknownFramework,
            StoreError::UnknownSession(_) => ErrorCode::UnknownSession,
            StoreError::UnknownLeaf(_) => ErrorCode::UnknownLeaf,
            StoreError::InvalidGrade { .. } => ErrorCode::InvalidGrade,
            StoreError::InvalidUserId(_) | StoreError::UserExists(_) => ErrorCode::InvalidRequest,
            StoreError::AlreadyFinalized(_) => ErrorCode::SessionFinalized,
            StoreError::NotFinalized(_) => ErrorCode::SessionNotFinalized,
            StoreError::Incomplete { .. } => ErrorCode::IncompleteAnswers,
            StoreError::Corrupt { .. }
            | StoreError::DuplicateFramework(_)
            | StoreError::Scoring(_)
            | StoreError::Io(_) => ErrorCode::Internal,
        };
        if code == ErrorCode::Internal {
            tracing::error!(error = %e, "store failure");
            return Self::new(code, "internal error");
        }
        let mut err = Self::new(code, e.to_string());
        if let StoreError::Incomplete { missing } = e {
            err.details = Some(missing);
        }
        err
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        Self::new(ErrorCode::SessionNotFinalized, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new(ErrorCode::InvalidRequest, e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::new(ErrorCode::InvalidRequest, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        canonical_response(self.code.status(), &self)
    }
}

fn canonical_response<T: Serialize + ?Sized>(status: StatusCode, body: &T) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        canonical::to_vec(body),
    )
        .into_response()
}

/// A successful canonical-JSON response.
pub struct Canonical(Response);

impl Canonical {
    pub fn ok<T: Serialize + ?Sized>(body: &T) -> Self {
        Self(canonical_response(StatusCode::OK, body))
    }

    pub fn created<T: Serialize + ?Sized>(body: &T) -> Self {
        Self(canonical_response(StatusCode::CREATED, body))
    }
}

impl IntoResponse for Canonical {
    fn into_response(self) -> Response {
        self.0
    }
}

type ApiResult = Result<Canonical, ApiError>;

fn read(store: &SharedStore) -> RwLockReadGuard<'_, Store> {
    store.read().unwrap_or_else(|p| p.into_inner())
}

fn write(store: &SharedStore) -> RwLockWriteGuard<'_, Store> {
    store.write().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Allowed CORS origin; `None` allows any origin.
    pub cors_origin: Option<String>,
}

pub fn router(store: SharedStore, config: &ServiceConfig) -> Router {
    let origin = match &config.cors_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => {
                tracing::warn!(origin = %o, "ignoring invalid CORS origin");
                AllowOrigin::any()
            }
        },
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::PUT, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]);

    Router::new()
        .route("/api/frameworks", get(list_frameworks))
        .route("/api/frameworks/{id}", get(get_framework))
        .route("/api/users", post(create_user))
        .route("/api/users/{id}/trend", get(user_trend))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/answers/{leaf_id}", put(submit_answer))
        .route("/api/sessions/{id}/finalize", post(finalize))
        .route("/api/sessions/{id}/result", get(session_result))
        .route("/api/sessions/{id}/summary", get(session_summary))
        .route("/api/sessions/{id}/histogram", get(session_histogram))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(store)
        .layer(CatchPanicLayer::custom(panic_response))
        .layer(cors)
}

async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(ErrorCode::MethodNotAllowed, "method not allowed")
}

fn panic_response(_: Box<dyn Any + Send + 'static>) -> Response {
    ApiError::new(ErrorCode::Internal, "internal error").into_response()
}

async fn list_frameworks(State(store): State<SharedStore>) -> ApiResult {
    let store = read(&store);
    let list: Vec<FrameworkSummary> = store.frameworks().map(|f| f.summary()).collect();
    Ok(Canonical::ok(&list))
}

async fn get_framework(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult {
    let store = read(&store);
    let def = store
        .framework(&id)
        .ok_or_else(|| ApiError::from(StoreError::UnknownFramework(id)))?;
    Ok(Canonical::ok(def.as_ref()))
}

#[derive(Debug, Deserialize)]
pub struct NewUser {
    pub user_id: String,
    #[serde(default)]
    pub display_name: String,
}

/// Creates the user (201), or returns the existing record (200): login is
/// only a track-record identity.
async fn create_user(
    State(store): State<SharedStore>,
    body: Result<Json<NewUser>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body?;
    let mut store = write(&store);
    if let Some(existing) = store.user(&body.user_id) {
        return Ok(Canonical::ok(existing));
    }
    let user = store.create_user(&body.user_id, &body.display_name)?;
    Ok(Canonical::created(&user))
}

async fn user_trend(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult {
    let store = read(&store);
    Ok(Canonical::ok(&store.trend(&id)?))
}

#[derive(Debug, Deserialize)]
pub struct NewSession {
    pub user_id: String,
    pub framework_id: String,
}

async fn create_session(
    State(store): State<SharedStore>,
    body: Result<Json<NewSession>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body?;
    let mut store = write(&store);
    let session = store.create_session(&body.user_id, &body.framework_id)?;
    Ok(Canonical::created(&session))
}

async fn get_session(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult {
    let store = read(&store);
    let session = store
        .session(&id)
        .ok_or_else(|| ApiError::from(StoreError::UnknownSession(id)))?;
    Ok(Canonical::ok(session))
}

#[derive(Debug, Deserialize)]
pub struct GradeBody {
    pub grade: i64,
}

async fn submit_answer(
    State(store): State<SharedStore>,
    Path((id, leaf_id)): Path<(String, String)>,
    body: Result<Json<GradeBody>, JsonRejection>,
) -> ApiResult {
    let Json(body) = body.map_err(|e| ApiError::new(ErrorCode::InvalidGrade, e.body_text()))?;
    let mut store = write(&store);
    let session = store.submit_answer(&id, &leaf_id, body.grade)?;
    Ok(Canonical::ok(&session))
}

async fn finalize(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult {
    let mut store = write(&store);
    store.finalize_session(&id)?;
    Ok(Canonical::ok(store.final_result(&id)?))
}

async fn session_result(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult {
    let store = read(&store);
    Ok(Canonical::ok(store.final_result(&id)?))
}

async fn session_summary(State(store): State<SharedStore>, Path(id): Path<String>) -> ApiResult {
    let store = read(&store);
    let summary = reporting::summarize(store.final_result(&id)?)?;
    Ok(Canonical::ok(&summary))
}

#[derive(Debug, Deserialize)]
pub struct HistogramQuery {
    #[serde(default = "default_level")]
    pub level: Level,
}

fn default_level() -> Level {
    Level::Domains
}

async fn session_histogram(
    State(store): State<SharedStore>,
    Path(id): Path<String>,
    query: Result<Query<HistogramQuery>, QueryRejection>,
) -> ApiResult {
    let Query(query) = query?;
    let store = read(&store);
    let series = reporting::histogram(store.final_result(&id)?, query.level)?;
    Ok(Canonical::ok(&series))
}
