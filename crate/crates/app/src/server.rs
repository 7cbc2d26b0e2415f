//! HTTP extraction service.
//!
//! `POST /extract` takes `{"description": "..."}` and answers with the same
//! JSON the `extract` subcommand prints. `GET /health` answers
//! `{"status":"ok"}`. The model is shared read-only across requests.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use softner_nn::MultiTaskModel;
use tokio::sync::Semaphore;

use crate::pipeline::extract_response;

pub const DEFAULT_MAX_BODY: usize = 1024 * 1024;
pub const DEFAULT_MAX_CONCURRENCY: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct ServerConfig {
    pub max_body_bytes: usize,
    /// Requests beyond this many in flight get 503.
    pub max_concurrency: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            max_body_bytes: DEFAULT_MAX_BODY,
            max_concurrency: DEFAULT_MAX_CONCURRENCY,
        }
    }
}

#[derive(Clone)]
struct AppState {
    model: Arc<MultiTaskModel>,
    permits: Arc<Semaphore>,
}

#[derive(Deserialize)]
struct ExtractRequest {
    description: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

pub fn router(model: Arc<MultiTaskModel>, config: ServerConfig) -> Router {
    let state = AppState {
        model,
        permits: Arc::new(Semaphore::new(config.max_concurrency.max(1))),
    };
    Router::new()
        .route("/extract", post(extract_handler))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(config.max_body_bytes))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn extract_handler(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> Response {
    let Ok(_permit) = state.permits.clone().try_acquire_owned() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "too many concurrent requests");
    };
    let body = match body {
        Ok(b) => b,
        Err(rejection) => return error(rejection.status(), rejection.body_text()),
    };
    let request: ExtractRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid request body: {e}")),
    };
    let model = state.model.clone();
    match tokio::task::spawn_blocking(move || extract_response(&model, &request.description)).await {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("{e:#}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, format!("extraction task failed: {e}")),
    }
}

/// Serve until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, model: Arc<MultiTaskModel>, config: ServerConfig) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(model, config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
