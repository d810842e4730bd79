//! HTTP/JSON API under `/api/v1`.
//!
//! | method | path                         | body                 |
//! |--------|------------------------------|----------------------|
//! | POST   | /sessions                    | `SessionConfig`      |
//! | POST   | /sessions/restore            | session snapshot     |
//! | GET    | /sessions/{id}               |                      |
//! | DELETE | /sessions/{id}               |                      |
//! | POST   | /sessions/{id}/users         | `{"count": n}`       |
//! | POST   | /sessions/{id}/train         |                      |
//! | POST   | /sessions/{id}/recover       | optional `{"k": k}`  |
//! | GET    | /sessions/{id}/report        | query `k`            |
//!
//! Errors are `{"error": {"code": ..., "message": ...}}` with 404 for an
//! unknown session, 409 when the session is not in a state that allows the
//! action, and 422 for invalid input.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gradleak_core::{
    recover_session, Error, Metrics, RecoveryReport, Session, SessionConfig, TrainEvent, DEFAULT_K,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::experiment::{EpochSummary, ExperimentReport};
use crate::store::{SessionEntry, SessionId, SessionStore, SharedEntry};

pub type AppState = Arc<SessionStore>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "session_not_found",
            format!("no session `{id}`"),
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::NotTrained => (StatusCode::CONFLICT, "not_trained"),
            Error::EmptyDataset => (StatusCode::CONFLICT, "no_users"),
            Error::InvalidConfig(_) | Error::InvalidBudget(_) | Error::MissingBudget(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_config")
            }
            Error::InvalidSnapshot(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_snapshot"),
            Error::InvalidArgument(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_argument"),
            Error::OutOfDomain(_) | Error::NotAClassifier(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes, code: &'static str) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string()))
}

fn lookup(store: &SessionStore, raw_id: &str) -> ApiResult<(SessionId, SharedEntry)> {
    let id = SessionId::parse(raw_id).ok_or_else(|| ApiError::not_found(raw_id))?;
    let entry = store.get(&id).ok_or_else(|| ApiError::not_found(raw_id))?;
    Ok((id, entry))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub id: SessionId,
    pub session: Session,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AddUsersRequest {
    pub count: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainResponse {
    pub id: SessionId,
    pub epoch: u64,
    pub events: Vec<TrainEvent>,
    pub metrics: Metrics,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct RecoverRequest {
    #[serde(default)]
    pub k: Option<f64>,
}

#[derive(Debug, Deserialize)]
pub struct ReportQuery {
    pub k: Option<f64>,
}

async fn create_session(
    State(store): State<AppState>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let config: SessionConfig = parse_body(&body, "invalid_config")?;
    let session = Session::new(config)?;
    let id = store.insert(SessionEntry::new(session.clone()));
    tracing::info!(%id, model = %config.model, mechanism = %config.mechanism, "session created");
    Ok((StatusCode::CREATED, Json(SessionView { id, session })))
}

async fn restore_session(
    State(store): State<AppState>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let session: Session = parse_body(&body, "invalid_snapshot")?;
    let id = store.insert(SessionEntry::new(session.clone()));
    tracing::info!(%id, "session restored from snapshot");
    Ok((StatusCode::CREATED, Json(SessionView { id, session })))
}

async fn get_session(
    State(store): State<AppState>,
    Path(raw_id): Path<String>,
) -> ApiResult<Json<SessionView>> {
    let (id, entry) = lookup(&store, &raw_id)?;
    let session = entry.lock().unwrap().session.clone();
    Ok(Json(SessionView { id, session }))
}

async fn delete_session(
    State(store): State<AppState>,
    Path(raw_id): Path<String>,
) -> ApiResult<StatusCode> {
    let id = SessionId::parse(&raw_id).ok_or_else(|| ApiError::not_found(&raw_id))?;
    if store.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&raw_id))
    }
}

async fn add_users(
    State(store): State<AppState>,
    Path(raw_id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SessionView>> {
    let (id, entry) = lookup(&store, &raw_id)?;
    let req: AddUsersRequest = parse_body(&body, "invalid_argument")?;
    let mut guard = entry.lock().unwrap();
    guard.session.add_users(req.count)?;
    Ok(Json(SessionView {
        id,
        session: guard.session.clone(),
    }))
}

async fn train(
    State(store): State<AppState>,
    Path(raw_id): Path<String>,
) -> ApiResult<Json<TrainResponse>> {
    let (id, entry) = lookup(&store, &raw_id)?;
    let mut guard = entry.lock().unwrap();
    let events = guard.session.train_epoch()?;
    let epoch = guard.session.epoch_count();
    guard.epochs.push(EpochSummary::from_events(epoch, &events));
    let metrics = guard.session.metrics()?;
    tracing::debug!(%id, epoch, cost = metrics.cost, "epoch trained");
    Ok(Json(TrainResponse {
        id,
        epoch,
        events,
        metrics,
    }))
}

async fn recover(
    State(store): State<AppState>,
    Path(raw_id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<RecoveryReport>> {
    let (_, entry) = lookup(&store, &raw_id)?;
    let req: RecoverRequest = if body.iter().all(u8::is_ascii_whitespace) {
        RecoverRequest::default()
    } else {
        parse_body(&body, "invalid_argument")?
    };
    let guard = entry.lock().unwrap();
    let report = recover_session(&guard.session, req.k.unwrap_or(DEFAULT_K))?;
    Ok(Json(report))
}

async fn report(
    State(store): State<AppState>,
    Path(raw_id): Path<String>,
    Query(query): Query<ReportQuery>,
) -> ApiResult<Json<ExperimentReport>> {
    let (_, entry) = lookup(&store, &raw_id)?;
    let guard = entry.lock().unwrap();
    let report = ExperimentReport::from_session(
        &guard.session,
        &guard.epochs,
        query.k.unwrap_or(DEFAULT_K),
    )?;
    Ok(Json(report))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "route_not_found", "no such endpoint")
}

pub fn api_routes() -> Router<AppState> {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/restore", post(restore_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/users", post(add_users))
        .route("/sessions/{id}/train", post(train))
        .route("/sessions/{id}/recover", post(recover))
        .route("/sessions/{id}/report", get(report))
        .fallback(api_not_found)
}

/// Full application: the API under `/api/v1`, static UI assets at `/` when a
/// directory is given, and request tracing.
pub fn router(store: AppState, static_dir: Option<PathBuf>) -> Router {
    let mut app = Router::new().nest("/api/v1", api_routes());
    if let Some(dir) = static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    app.layer(TraceLayer::new_for_http()).with_state(store)
}
