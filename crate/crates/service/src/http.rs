//! Axum router over an [`Engine`].
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/health` | |
//! | GET | `/topology` | |
//! | GET | `/events` | |
//! | POST | `/analyze` | [`AnalyzeRequest`] |
//! | POST | `/dendrogram` | [`DendrogramRequest`] |
//! | POST | `/embedding` | [`EmbeddingRequest`] |
//! | GET | `/timeline?from&to&window_s&attribute&pmu_ids` | |
//! | GET | `/schema`, `/schema/{name}` | |
//! | GET | `/stats` | cache counters |

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::api::{AnalyzeRequest, DendrogramRequest, EmbeddingRequest, TimelineQuery};
use crate::engine::Engine;
use crate::error::{ApiError, ApiResult};
use crate::schema;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(json!({ "error": self }))).into_response()
    }
}

fn json_bytes(body: Arc<Vec<u8>>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body.as_ref().clone()).into_response()
}

async fn blocking<F>(f: F) -> Response
where
    F: FnOnce() -> ApiResult<Arc<Vec<u8>>> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(body)) => json_bytes(body),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ApiError::internal(format!("worker failed: {e}")).into_response(),
    }
}

fn body<T>(r: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    r.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn health() -> Response {
    Json(json!({"status": "ok"})).into_response()
}

async fn topology(State(e): State<Arc<Engine>>) -> Response {
    blocking(move || e.topology_body()).await
}

async fn events(State(e): State<Arc<Engine>>) -> Response {
    blocking(move || e.events_body()).await
}

async fn analyze(State(e): State<Arc<Engine>>, req: Result<Json<AnalyzeRequest>, JsonRejection>) -> Response {
    match body(req) {
        Ok(req) => blocking(move || e.analyze_body(req)).await,
        Err(err) => err.into_response(),
    }
}

async fn dendrogram(State(e): State<Arc<Engine>>, req: Result<Json<DendrogramRequest>, JsonRejection>) -> Response {
    match body(req) {
        Ok(req) => blocking(move || e.dendrogram_body(req)).await,
        Err(err) => err.into_response(),
    }
}

async fn embedding(State(e): State<Arc<Engine>>, req: Result<Json<EmbeddingRequest>, JsonRejection>) -> Response {
    match body(req) {
        Ok(req) => blocking(move || e.embedding_body(req)).await,
        Err(err) => err.into_response(),
    }
}

async fn timeline(State(e): State<Arc<Engine>>, q: Result<Query<TimelineQuery>, QueryRejection>) -> Response {
    match q {
        Ok(Query(q)) => blocking(move || e.timeline_body(q)).await,
        Err(err) => ApiError::bad_request(err.body_text()).into_response(),
    }
}

async fn schema_index() -> Response {
    Json(schema::index()).into_response()
}

async fn schema_doc(Path(name): Path<String>) -> Response {
    match schema::schema(&name) {
        Some(doc) => Json(doc).into_response(),
        None => ApiError::not_found(format!("no schema named {name:?}")).into_response(),
    }
}

async fn stats(State(e): State<Arc<Engine>>) -> Response {
    Json(e.cache_stats()).into_response()
}

async fn fallback() -> Response {
    ApiError::not_found("no such route").into_response()
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/topology", get(topology))
        .route("/events", get(events))
        .route("/analyze", post(analyze))
        .route("/dendrogram", post(dendrogram))
        .route("/embedding", post(embedding))
        .route("/timeline", get(timeline))
        .route("/schema", get(schema_index))
        .route("/schema/{name}", get(schema_doc))
        .route("/stats", get(stats))
        .fallback(fallback)
        .with_state(engine)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(engine: Arc<Engine>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
