#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use bmsi_core::session::Decoder;
use bmsi_core::SystemConfig;
use bmsi_service::setup::{search_context, synthetic_model};
use bmsi_service::{router, AppState};
use serde::de::DeserializeOwned;
use serde_json::Value;
use tower::ServiceExt;

pub fn app_with(config: SystemConfig, log_dir: Option<PathBuf>) -> Router {
    let model = synthetic_model(config.sampling_rate, 11).unwrap();
    let ctx = search_context(config.clone(), None, None, None).unwrap();
    let decoder = Decoder::new(config, Arc::new(model));
    router(Arc::new(AppState::new(decoder, ctx, log_dir)))
}

pub fn app() -> Router {
    app_with(SystemConfig::default(), None)
}

pub async fn send(app: &Router, method: Method, uri: &str, content_type: &str, body: Vec<u8>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header(header::CONTENT_TYPE, content_type)
        .body(Body::from(body))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec())
}

pub async fn get<T: DeserializeOwned>(app: &Router, uri: &str) -> (StatusCode, T) {
    let (status, body) = send(app, Method::GET, uri, "application/json", Vec::new()).await;
    (status, serde_json::from_slice(&body).unwrap())
}

pub async fn post<T: DeserializeOwned>(app: &Router, uri: &str, body: &Value) -> (StatusCode, T) {
    let (status, body) = send(app, Method::POST, uri, "application/json", serde_json::to_vec(body).unwrap()).await;
    (status, serde_json::from_slice(&body).unwrap())
}

pub async fn new_session(app: &Router) -> String {
    let (status, v): (_, Value) = post(app, "/session", &Value::Null).await;
    assert_eq!(status, StatusCode::CREATED);
    v["session_id"].as_str().unwrap().to_string()
}

/// Noise-free gaze window at `key`, from the service itself.
pub async fn gaze(app: &Router, key: &str, seed: u64) -> Value {
    let (status, v) = post(app, "/synth", &serde_json::json!({ "kind": "ssvep", "key": key, "seed": seed })).await;
    assert_eq!(status, StatusCode::OK);
    v
}

pub async fn satisfaction(app: &Router, satisfied: bool, seed: u64) -> Value {
    let (status, v) = post(app, "/synth", &serde_json::json!({ "kind": "satisfaction", "satisfied": satisfied, "seed": seed })).await;
    assert_eq!(status, StatusCode::OK);
    v
}

pub async fn post_eeg(app: &Router, id: &str, msg: &Value) -> (StatusCode, Value) {
    post(app, &format!("/session/{id}/eeg"), msg).await
}

/// Types the keys by gaze and returns the last response.
pub async fn spell(app: &Router, id: &str, keys: &[&str]) -> Value {
    let mut last = Value::Null;
    for (i, key) in keys.iter().enumerate() {
        let (status, v) = post_eeg(app, id, &gaze(app, key, i as u64).await).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        assert_eq!(v["status"], "accepted", "{v}");
        last = v;
    }
    last
}
