//! Drives the HTTP router in process: topology, an analysis request, a
//! validation error and the schema index.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use gridpulse_service::config::ServiceConfig;
use gridpulse_service::dataset::{generate_dataset, Dataset, GenerateOptions};
use gridpulse_service::http::router;
use gridpulse_service::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn send(engine: &Arc<Engine>, method: &str, uri: &str, body: Option<Value>) -> (u16, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let body = body.map_or(Body::empty(), |b| Body::from(b.to_string()));
    let resp = router(engine.clone()).oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    generate_dataset(dir.path(), &GenerateOptions { minutes: 5, dense: true, ..Default::default() })?;
    let engine = Arc::new(Engine::new(Dataset::open(dir.path())?, ServiceConfig::default()));

    let (status, topo) = send(&engine, "GET", "/topology", None).await;
    println!("GET /topology {status}: {}", topo["counts"]);

    let (_, events) = send(&engine, "GET", "/events", None).await;
    let id = events["events"][0]["id"].as_str().unwrap().to_string();
    let (status, a) = send(&engine, "POST", "/analyze", Some(json!({ "event_id": id, "threshold_pct": 80 }))).await;
    println!(
        "POST /analyze {status}: {} frames, focus peak PMU {}, params {}",
        a["frames"].as_array().map_or(0, Vec::len),
        a["focus"]["peak_pmu"],
        a["params"]
    );

    let (status, err) = send(&engine, "POST", "/analyze", Some(json!({ "event_id": id, "window_s": 3 }))).await;
    println!("POST /analyze window_s=3 {status}: {}", err["error"]);

    let (status, idx) = send(&engine, "GET", "/schema", None).await;
    println!("GET /schema {status}: {idx}");
    let (_, stats) = send(&engine, "GET", "/stats", None).await;
    println!("GET /stats: {stats}");
    Ok(())
}
