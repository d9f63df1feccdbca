//! HTTP routes over [`SdsService`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::service::{check_session_id, QuestionnaireRequest, SdsService, ServiceError, TurnRequest, RETRY_AFTER_SECS};

/// Large enough for a minute of 16 kHz PCM in base64.
pub const MAX_BODY_BYTES: usize = 8 * 1024 * 1024;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound => StatusCode::NOT_FOUND,
            ServiceError::Busy => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Stage { .. } => StatusCode::BAD_GATEWAY,
            ServiceError::Storage(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = ?self, "request failed");
        }
        let mut resp = (status, Json(ErrorBody { error: self.to_string() })).into_response();
        if matches!(self, ServiceError::Busy) {
            resp.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(RETRY_AFTER_SECS));
        }
        resp
    }
}

#[derive(Clone)]
struct AppState {
    service: Arc<SdsService>,
    token: Option<Arc<str>>,
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|v| v == &**token);
        if !ok {
            return (StatusCode::UNAUTHORIZED, Json(ErrorBody { error: "missing or invalid token".into() })).into_response();
        }
    }
    next.run(req).await
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

fn parse<T: serde::de::DeserializeOwned>(body: &[u8], status_422: bool) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| {
        let msg = format!("invalid request body: {e}");
        if status_422 && e.is_data() {
            ServiceError::Unprocessable(msg)
        } else {
            ServiceError::BadRequest(msg)
        }
    })
}

async fn create_session(State(s): State<AppState>) -> Result<impl IntoResponse, ServiceError> {
    let svc = s.service.clone();
    let created = blocking(move || svc.create_session()).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn post_turn(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<impl IntoResponse, ServiceError> {
    check_session_id(&id)?;
    let request: TurnRequest = parse(&body, false)?;
    let svc = s.service.clone();
    Ok(Json(blocking(move || svc.post_turn(&id, request)).await?))
}

async fn get_session(State(s): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    check_session_id(&id)?;
    Ok(Json(s.service.transcript(&id)?))
}

async fn submit_questionnaire(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ServiceError> {
    check_session_id(&id)?;
    let request: QuestionnaireRequest = parse(&body, true)?;
    let svc = s.service.clone();
    Ok(Json(blocking(move || svc.submit_questionnaire(&id, request.items)).await?))
}

#[derive(Debug, Deserialize)]
struct ReportQuery {
    a: String,
    b: String,
}

async fn report(State(s): State<AppState>, Query(q): Query<ReportQuery>) -> Result<impl IntoResponse, ServiceError> {
    let svc = s.service.clone();
    Ok(Json(blocking(move || svc.report(&q.a, &q.b)).await?))
}

async fn health() -> &'static str {
    "ok"
}

/// Builds the router. With `token` set, every route except `/health`
/// requires `Authorization: Bearer <token>`.
pub fn router(service: Arc<SdsService>, token: Option<String>) -> Router {
    let state = AppState { service, token: token.map(Into::into) };
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turns", post(post_turn))
        .route("/sessions/{id}/questionnaire", post(submit_questionnaire))
        .route("/report", get(report))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}
