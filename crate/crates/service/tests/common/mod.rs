#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use mowa_core::platform::Platform;
use mowa_core::{parse_spec, MobileAppSpec};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn museum_bytes() -> Vec<u8> {
    std::fs::read(fixtures().join("museum/museum.mowa.xml")).unwrap()
}

pub fn museum() -> MobileAppSpec {
    parse_spec(&museum_bytes()).unwrap()
}

/// Service over a fresh store and the museum corpus and cache.
pub fn museum_service() -> (tempfile::TempDir, Arc<Platform>, Router) {
    let dir = tempfile::tempdir().unwrap();
    let m = fixtures().join("museum");
    let platform =
        Arc::new(Platform::open(dir.path(), Some(&m.join("corpus")), Some(&m.join("cache")), "en").unwrap());
    let router = mowa_service::router(platform.clone());
    (dir, platform, router)
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }
}

pub async fn send(router: &Router, method: Method, uri: &str, body: Option<Value>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(serde_json::to_vec(&v).unwrap())
        }
        None => Body::empty(),
    };
    raw(router, req.body(body).unwrap()).await
}

pub async fn raw(router: &Router, req: Request<Body>) -> Reply {
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp.headers().get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string());
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, body }
}

pub async fn get(router: &Router, uri: &str) -> Reply {
    send(router, Method::GET, uri, None).await
}

pub async fn post(router: &Router, uri: &str, body: Value) -> Reply {
    send(router, Method::POST, uri, Some(body)).await
}

/// Six stage payloads that rebuild `spec`.
pub fn stage_payloads(spec: &MobileAppSpec) -> Vec<Value> {
    vec![
        json!({"name": spec.name, "namespace": spec.namespace, "filename": spec.filename, "locale": spec.locale}),
        json!({"context_types": spec.context_types}),
        json!({"sensors": spec.sensors}),
        json!({"space": spec.space}),
        json!({"layers": spec.layers}),
        json!({"rules": spec.rules}),
    ]
}

pub async fn new_session(router: &Router) -> String {
    let r = send(router, Method::POST, "/sessions", None).await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()["id"].as_str().unwrap().to_string()
}
