//! HTTP/JSON API over a [`DatasetStore`].
//!
//! | method | path                    | body                      |
//! |--------|-------------------------|---------------------------|
//! | GET    | `/users`                | user summaries            |
//! | GET    | `/users/{id}/graph`     | mobility graph            |
//! | GET    | `/users/{id}/patterns`  | canonical pattern list    |
//! | GET    | `/users/{id}/stats`     | statistics + top patterns |
//! | POST   | `/upload`               | ingest report             |
//!
//! Every response carries the snapshot version it was computed from in the
//! `x-snapshot-version` header. Errors are `{"error": code, "message": text}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::to_bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;

use crate::miner::{MinSupport, MinerError, MiningConfig, DEFAULT_MAX_PATTERN_LENGTH};
use crate::pipeline::DEFAULT_SUMMARY_MIN_SUPPORT;
use crate::store::{DatasetStore, StoreError};

pub const VERSION_HEADER: &str = "x-snapshot-version";

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    version: Option<u64>,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
            version: None,
        }
    }

    fn at(mut self, version: u64) -> Self {
        self.version = Some(version);
        self
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        let (status, code) = match &err {
            StoreError::UnknownUser(_) => (StatusCode::NOT_FOUND, "unknown_user"),
            StoreError::Config(_) => (StatusCode::BAD_REQUEST, "config_error"),
            StoreError::TooLarge { .. } => (StatusCode::PAYLOAD_TOO_LARGE, "too_large"),
            StoreError::NoValidLines(_) => (StatusCode::BAD_REQUEST, "no_valid_lines"),
            StoreError::Pipeline(_) | StoreError::Io(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        ApiError {
            status,
            code,
            message: err.to_string(),
            version: None,
        }
    }
}

impl From<MinerError> for ApiError {
    fn from(err: MinerError) -> Self {
        StoreError::Config(err).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_string(&ErrorBody {
            error: self.code,
            message: self.message,
        })
        .expect("error serialization is infallible");
        json_response(self.status, body, self.version)
    }
}

fn json_response(status: StatusCode, body: String, version: Option<u64>) -> Response {
    let mut response = (status, body).into_response();
    let headers = response.headers_mut();
    headers.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/json"),
    );
    if let Some(v) = version {
        headers.insert(VERSION_HEADER, HeaderValue::from(v));
    }
    response
}

fn ok_json(body: String, version: u64) -> Response {
    json_response(StatusCode::OK, body, Some(version))
}

type Params = HashMap<String, String>;

fn usize_param(params: &Params, name: &str) -> Result<Option<usize>, ApiError> {
    params
        .get(name)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| ApiError::bad_request(format!("{name} must be a non-negative integer")))
        })
        .transpose()
}

fn min_support_param(params: &Params) -> Result<Option<MinSupport>, ApiError> {
    params
        .get("min_support")
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<MinSupport>().map_err(ApiError::from))
        .transpose()
}

fn mining_config(params: &Params, default_min_support: Option<usize>) -> Result<MiningConfig, ApiError> {
    let min_support = match (min_support_param(params)?, default_min_support) {
        (Some(s), _) => s,
        (None, Some(d)) => MinSupport::Absolute(d),
        (None, None) => {
            return Err(ApiError::from(MinerError::Config(
                "min_support is required".to_string(),
            )))
        }
    };
    Ok(MiningConfig::new(min_support)
        .with_max_pattern_length(usize_param(params, "max_len")?.unwrap_or(DEFAULT_MAX_PATTERN_LENGTH))
        .with_max_gap(usize_param(params, "max_gap")?))
}

async fn list_users(State(store): State<Arc<DatasetStore>>) -> Response {
    let snapshot = store.snapshot();
    let body = serde_json::to_string(&snapshot.list_users()).expect("infallible");
    ok_json(body, snapshot.version)
}

async fn get_patterns(
    State(store): State<Arc<DatasetStore>>,
    Path(user_id): Path<String>,
    Query(params): Query<Params>,
) -> Result<Response, ApiError> {
    let snapshot = store.snapshot();
    let version = snapshot.version;
    let config = mining_config(&params, None).map_err(|e| e.at(version))?;
    let patterns = tokio::task::spawn_blocking(move || {
        store.patterns(&snapshot, &user_id, &config)
    })
    .await
    .expect("mining task panicked")
    .map_err(|e| ApiError::from(e).at(version))?;
    Ok(ok_json(crate::miner::patterns_to_json(&patterns), version))
}

async fn get_graph(
    State(store): State<Arc<DatasetStore>>,
    Path(user_id): Path<String>,
    Query(params): Query<Params>,
) -> Result<Response, ApiError> {
    let snapshot = store.snapshot();
    let version = snapshot.version;
    let min_support = min_support_param(&params)
        .map_err(|e| e.at(version))?
        .unwrap_or(MinSupport::Absolute(DEFAULT_SUMMARY_MIN_SUPPORT));
    let max_gap = usize_param(&params, "max_gap").map_err(|e| e.at(version))?;
    let graph = tokio::task::spawn_blocking(move || {
        store.graph(&snapshot, &user_id, min_support, max_gap)
    })
    .await
    .expect("graph task panicked")
    .map_err(|e| ApiError::from(e).at(version))?;
    Ok(ok_json(graph.to_json(), version))
}

async fn get_stats(
    State(store): State<Arc<DatasetStore>>,
    Path(user_id): Path<String>,
    Query(params): Query<Params>,
) -> Result<Response, ApiError> {
    let snapshot = store.snapshot();
    let version = snapshot.version;
    let config =
        mining_config(&params, Some(DEFAULT_SUMMARY_MIN_SUPPORT)).map_err(|e| e.at(version))?;
    let stats = tokio::task::spawn_blocking(move || store.stats(&snapshot, &user_id, &config))
        .await
        .expect("stats task panicked")
        .map_err(|e| ApiError::from(e).at(version))?;
    Ok(ok_json(stats.to_json(), version))
}

async fn upload(
    State(store): State<Arc<DatasetStore>>,
    request: axum::extract::Request,
) -> Result<Response, ApiError> {
    let limit = store.max_upload_bytes();
    let too_large = |size| ApiError::from(StoreError::TooLarge { size, limit }).at(store.version());
    let declared = request
        .headers()
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(size) = declared.filter(|&s| s > limit) {
        return Err(too_large(size));
    }
    // Streaming bodies without a length are cut off at the limit.
    let bytes = to_bytes(request.into_body(), limit)
        .await
        .map_err(|_| too_large(limit + 1))?;
    let writer = Arc::clone(&store);
    let (report, version) = tokio::task::spawn_blocking(move || writer.upload(&bytes))
        .await
        .expect("upload task panicked")
        .map_err(|e| ApiError::from(e).at(store.version()))?;
    Ok(ok_json(report.to_json(), version))
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        code: "not_found",
        message: "no such endpoint".to_string(),
        version: None,
    }
}

pub fn router(store: Arc<DatasetStore>) -> Router {
    Router::new()
        .route("/users", get(list_users))
        .route("/users/{id}/graph", get(get_graph))
        .route("/users/{id}/patterns", get(get_patterns))
        .route("/users/{id}/stats", get(get_stats))
        .route("/upload", post(upload))
        .fallback(not_found)
        .with_state(store)
}

pub async fn serve(store: Arc<DatasetStore>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
