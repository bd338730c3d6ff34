use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use gridpulse::model::Attribute;
use gridpulse_service::config::ServiceConfig;
use gridpulse_service::dataset::{generate_dataset, Dataset, GenerateOptions, GenerateSummary};
use gridpulse_service::http::router;
use gridpulse_service::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
    summary: GenerateSummary,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let opts = GenerateOptions {
            seed: 11,
            substations: 10,
            days: 2,
            minutes: 10,
            attributes: vec![Attribute::VPm, Attribute::VAm],
            dense: true,
            ..Default::default()
        };
        let summary = generate_dataset(dir.path(), &opts).unwrap();
        Fixture {
            root: dir.path().to_path_buf(),
            _dir: dir,
            summary,
        }
    })
}

fn engine() -> Arc<Engine> {
    Arc::new(Engine::new(Dataset::open(&fixture().root).unwrap(), ServiceConfig::default()))
}

async fn call(e: &Arc<Engine>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(e.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(e: &Arc<Engine>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = call(e, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn first_event(e: &Engine) -> gridpulse::model::EventRecord {
    e.dataset().events[0].clone()
}

#[tokio::test]
async fn topology_counts_match_generator() {
    let e = engine();
    let (s, v) = call_json(&e, "GET", "/topology", None).await;
    assert_eq!(s, StatusCode::OK);
    let sum = &fixture().summary;
    assert_eq!(v["counts"]["substations"], sum.substations);
    assert_eq!(v["counts"]["buses"], sum.buses);
    assert_eq!(v["counts"]["edges"], sum.edges);
    assert_eq!(v["counts"]["pmus"], sum.pmus);
    assert_eq!(v["topology"]["pmus"].as_array().unwrap().len(), sum.pmus);
}

#[tokio::test]
async fn events_lists_ground_truth_and_reports() {
    let e = engine();
    let (s, v) = call_json(&e, "GET", "/events", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["events"].as_array().unwrap().len(), fixture().summary.events);
    assert_eq!(v["reports"].as_array().unwrap().len(), fixture().summary.reports);
}

#[tokio::test]
async fn full_threshold_flags_only_the_peak() {
    let e = engine();
    let ev = first_event(&e);
    let (s, v) = call_json(&e, "POST", "/analyze", Some(json!({"event_id": ev.id, "threshold_pct": 100}))).await;
    assert_eq!(s, StatusCode::OK);
    let frames = v["frames"].as_array().unwrap();
    assert!(!frames.is_empty());
    for f in frames {
        let flags = f["flags"].as_array().unwrap();
        let peak = f["peak_magnitude"].as_f64().unwrap();
        let ties = f["ranking"].as_array().unwrap().iter().filter(|c| c["magnitude"].as_f64() == Some(peak)).count();
        assert_eq!(flags.len(), ties);
        assert_eq!(flags[0]["pmu"], f["peak_pmu"]);
    }
    // the injected source dominates inside the event
    assert_eq!(frames[0]["peak_pmu"], json!(ev.epicenter_pmus[0].0));
    assert_eq!(v["params"]["threshold_pct"], 100.0);
    assert_eq!(v["params"]["window_s"], 10);
    assert_eq!(v["params"]["attribute"], "VPm");
    assert!(v["focus"]["kde"]["values"].as_array().unwrap().len() > 1);
}

#[tokio::test]
async fn identical_requests_give_identical_bytes() {
    let ev = first_event(&engine());
    let at = ev.t_start.unwrap() + chrono::Duration::seconds(20);
    let body = json!({"epicenter_ids": [ev.epicenter_pmus[0].0], "at": at});
    let e = engine();
    let (s1, a) = call(&e, "POST", "/dendrogram", Some(body.clone())).await;
    let (s2, b) = call(&e, "POST", "/dendrogram", Some(body.clone())).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a, b);
    assert!(e.cache_stats().hits >= 1);
    // a fresh engine recomputes from scratch and must agree
    let (_, c) = call(&engine(), "POST", "/dendrogram", Some(body.clone())).await;
    assert_eq!(a, c);

    let analyze = json!({"event_id": ev.id, "threshold_pct": 60});
    let (_, x) = call(&engine(), "POST", "/analyze", Some(analyze.clone())).await;
    let (_, y) = call(&engine(), "POST", "/analyze", Some(analyze)).await;
    assert_eq!(x, y);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_requests_agree() {
    let ev = first_event(&engine());
    let at = ev.t_start.unwrap() + chrono::Duration::seconds(30);
    let e = engine();
    let body = json!({"at": at, "seed": 3});
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let e = e.clone();
            let body = body.clone();
            tokio::spawn(async move { call(&e, "POST", "/embedding", Some(body)).await })
        })
        .collect();
    let mut bodies = Vec::new();
    for h in handles {
        let (s, b) = h.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        bodies.push(b);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn error_statuses() {
    let e = engine();
    let ev = first_event(&e);
    let t = ev.t_start.unwrap();
    let cases = [
        (json!({"event_id": "missing"}), StatusCode::NOT_FOUND),
        (json!({"event_id": ev.id, "pmu_ids": [424242]}), StatusCode::NOT_FOUND),
        (json!({"event_id": ev.id, "window_s": 7}), StatusCode::BAD_REQUEST),
        (json!({"event_id": ev.id, "threshold_pct": 0}), StatusCode::BAD_REQUEST),
        (json!({"event_id": ev.id, "bogus": 1}), StatusCode::BAD_REQUEST),
        (json!({"from": t}), StatusCode::BAD_REQUEST),
        (json!({"event_id": ev.id, "attribute": "XYZ"}), StatusCode::BAD_REQUEST),
        (
            json!({"from": "2030-01-01T00:00:00", "to": "2030-01-01T00:01:00"}),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            json!({"event_id": ev.id, "at": "2030-01-01T00:00:00"}),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
    ];
    for (body, want) in cases {
        let (s, v) = call_json(&e, "POST", "/analyze", Some(body.clone())).await;
        assert_eq!(s, want, "{body} -> {v}");
        assert!(v["error"]["message"].is_string());
    }
    let (s, _) = call(&e, "POST", "/analyze", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&e, "POST", "/dendrogram", Some(json!({"epicenter_ids": [], "at": t}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&e, "POST", "/dendrogram", Some(json!({"epicenter_ids": [ev.epicenter_pmus[0].0], "at": t, "k": 0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&e, "POST", "/embedding", Some(json!({"at": t, "perplexity": 1000}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&e, "GET", "/timeline?from=2017-04-20T20:00:00", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&e, "GET", "/timeline?from=nope&to=x", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&e, "GET", "/nowhere", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&e, "GET", "/schema/nothing", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn timeline_and_embedding_echo_params() {
    let e = engine();
    let ev = first_event(&e);
    let t = ev.t_start.unwrap();
    let uri = format!(
        "/timeline?from={}&to={}&window_s=5&attribute=VAm",
        t.format("%Y-%m-%dT%H:%M:%S"),
        (t + chrono::Duration::seconds(60)).format("%Y-%m-%dT%H:%M:%S")
    );
    let (s, v) = call_json(&e, "GET", &uri, None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["params"]["window_s"], 5);
    assert_eq!(v["params"]["attribute"], "VAm");
    assert_eq!(v["entries"].as_array().unwrap().len(), 12);
    let f0 = ev.oscillation_hz.unwrap();
    for entry in v["entries"].as_array().unwrap() {
        assert!((entry["frequency_hz"].as_f64().unwrap() - f0).abs() < 0.21, "{f0} {entry}");
    }

    let (s, v) = call_json(&e, "POST", "/embedding", Some(json!({"at": t, "collision_radius": 0.5}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["points"].as_array().unwrap().len(), fixture().summary.pmus);
    assert_eq!(v["params"]["epicenter_id"], json!(ev.epicenter_pmus[0].0));
    assert_eq!(v["overlaps"], 0);
    assert!(v["params"]["perplexity"].as_f64().unwrap() >= 1.0);
}

#[tokio::test]
async fn schemas_are_served() {
    let e = engine();
    let (s, v) = call_json(&e, "GET", "/schema", None).await;
    assert_eq!(s, StatusCode::OK);
    for path in v["schemas"].as_array().unwrap() {
        let (s, doc) = call_json(&e, "GET", path.as_str().unwrap(), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(doc["version"], v["version"]);
    }
}
