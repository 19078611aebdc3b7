use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::error::ServiceError;
use crate::store::{CreateRequest, NextResponse, SessionStore, SessionView};

fn parse_json<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid body: {e}")))
}

async fn create(
    State(store): State<Arc<SessionStore>>,
    body: Bytes,
) -> Result<impl IntoResponse, ServiceError> {
    let req: CreateRequest = parse_json(&body)?;
    let view = store.create(req)?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn next(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Json<NextResponse>, ServiceError> {
    store.next(&id).map(Json)
}

#[derive(Deserialize)]
struct AnswerRequest {
    outcome: String,
}

async fn answer(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ServiceError> {
    let req: AnswerRequest = parse_json(&body)?;
    store.answer(&id, &req.outcome).map(Json)
}

async fn show(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ServiceError> {
    store.get(&id).map(Json)
}

/// The session API, with static files from `static_dir` served at `/`.
pub fn router(store: Arc<SessionStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/answer", post(answer))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}
