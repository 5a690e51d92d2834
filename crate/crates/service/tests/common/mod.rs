#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use mrbanks_core::market::{load_dataset, Dataset};
use mrbanks_service::api::router;
use mrbanks_service::config::ServiceConfig;
use mrbanks_service::state::{AppState, ManualClock};
use serde_json::Value;
use tower::ServiceExt;

pub const T0: u64 = 1_700_000_000_000;

pub fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/manifest.json")
}

pub fn dataset() -> Arc<Dataset> {
    Arc::new(load_dataset(&manifest()).unwrap())
}

pub struct Harness {
    pub state: Arc<AppState>,
    pub app: Router,
    pub clock: Arc<ManualClock>,
    pub config: ServiceConfig,
    pub dataset: Arc<Dataset>,
}

impl Harness {
    pub fn new(log: &Path) -> Self {
        let config = ServiceConfig {
            log_path: log.to_path_buf(),
            manifest: manifest(),
            seed: 11,
            ..Default::default()
        };
        Self::with(config, dataset(), Arc::new(ManualClock::new(T0)))
    }

    pub fn with(config: ServiceConfig, dataset: Arc<Dataset>, clock: Arc<ManualClock>) -> Self {
        let state = Arc::new(AppState::open(config.clone(), dataset.clone(), clock.clone()).unwrap());
        Harness {
            app: router(state.clone()),
            state,
            clock,
            config,
            dataset,
        }
    }

    /// Same log, fresh process.
    pub fn restart(&self) -> Self {
        Self::with(self.config.clone(), self.dataset.clone(), self.clock.clone())
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, text) = self.call_raw(method, uri, body).await;
        let value = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap_or(Value::String(text)) };
        (status, value)
    }

    pub async fn call_raw(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, String) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    pub async fn participant(&self) -> String {
        let (s, v) = self
            .post(
                "/v1/participants",
                serde_json::json!({"gender": "F", "age_band": "26-35", "education": "University"}),
            )
            .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v["participant_id"].as_str().unwrap().to_string()
    }

    pub async fn session(&self, participant: &str, scenario: u8) -> Value {
        let (s, v) = self
            .post(
                "/v1/sessions",
                serde_json::json!({"participant_id": participant, "scenario_id": scenario}),
            )
            .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        v
    }
}
