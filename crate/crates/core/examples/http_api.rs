// The HTTP API driven in-process: model structure, a prediction and an
// invalid-state error.
//
// `cargo run --example http_api` (use `afrisk serve` for a real listener)

use std::sync::Arc;

use afrisk::builder::shipped_model;
use afrisk::knowledge::KnowledgeModel;
use afrisk::service::{router, AppState, Snapshot};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .expect("request");
    let response = app.clone().oneshot(request).await.expect("infallible");
    let status = response.status();
    let bytes = response.into_body().collect().await.expect("body").to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

pub fn run_example() -> afrisk::Result<()> {
    let snapshot = Snapshot { built: shipped_model()?, knowledge: KnowledgeModel::atrial_fibrillation() };
    let app = router(Arc::new(AppState::new(Some(snapshot))), None);
    let rt = tokio::runtime::Builder::new_current_thread().build()?;
    rt.block_on(async {
        let (_, model) = call(&app, "GET", "/api/model", "").await;
        println!("model: {} nodes, target {}", model["nodes"].as_array().map_or(0, Vec::len), model["target"]);

        let (status, p) = call(&app, "POST", "/api/predict", r#"{"evidence": {"age_group": ">74", "hypertension": "present"}}"#).await;
        println!("{status} p_present = {} ({})", p["p_present"], p["classification"]);

        let (status, e) = call(&app, "POST", "/api/predict", r#"{"evidence": {"age_group": "200"}}"#).await;
        println!("{status} {}: valid states {}", e["code"], e["details"]["valid_states"]);
        assert_eq!(status, StatusCode::BAD_REQUEST);
    });
    Ok(())
}

#[allow(dead_code)]
fn main() -> afrisk::Result<()> {
    run_example()
}
