//! HTTP API shared with the scanner UI.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use phishscan_core::{EvasionCategory, Label};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::record::{ScanStatus, SCHEMA_VERSION};
use crate::scanner::{ScanError, Scanner};
use crate::store::RecordFilter;

pub const DEFAULT_PAGE_SIZE: usize = 100;
pub const MAX_PAGE_SIZE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanRequest {
    pub url: String,
    /// Where the url came from, e.g. `qr` for a url decoded from a QR code
    /// by the client.
    #[serde(default)]
    pub source: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordsQuery {
    pub category: Option<EvasionCategory>,
    pub label: Option<Label>,
    pub status: Option<ScanStatus>,
    pub since: Option<DateTime<Utc>>,
    pub until: Option<DateTime<Utc>>,
    pub page: Option<usize>,
    pub page_size: Option<usize>,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "schema_version": SCHEMA_VERSION, "error": self.1 }))).into_response()
    }
}

impl From<ScanError> for ApiError {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::InvalidUrl(_) => ApiError(StatusCode::BAD_REQUEST, e.to_string()),
            _ => ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }
}

pub fn router(scanner: Arc<Scanner>) -> Router {
    Router::new()
        .route("/scan", post(scan))
        .route("/records", get(records))
        .route("/record", get(record_by_query))
        .route("/record/{*url}", get(record_by_path))
        .route("/health", get(health))
        .with_state(scanner)
}

async fn scan(State(s): State<Arc<Scanner>>, Json(req): Json<ScanRequest>) -> Result<Response, ApiError> {
    if let Some(source) = &req.source {
        tracing::info!(url = %req.url, source, "scan requested");
    }
    Ok(Json(s.scan_url(&req.url).await?).into_response())
}

async fn records(State(s): State<Arc<Scanner>>, Query(q): Query<RecordsQuery>) -> Result<Response, ApiError> {
    let page_size = q.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError(StatusCode::BAD_REQUEST, format!("page_size must be in 1..={MAX_PAGE_SIZE}")));
    }
    let filter =
        RecordFilter { category: q.category, label: q.label, status: q.status, since: q.since, until: q.until };
    let page = s
        .store()
        .list(&filter, q.page.unwrap_or(1), page_size)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(page).into_response())
}

fn lookup(s: &Scanner, url: &str) -> Result<Response, ApiError> {
    let key = crate::ingest::normalize_url(url).unwrap_or_else(|| url.to_string());
    match s.store().get(&key) {
        Some(r) => Ok(Json(r).into_response()),
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("no record for {url}"))),
    }
}

#[derive(Deserialize)]
struct UrlQuery {
    url: String,
}

async fn record_by_query(State(s): State<Arc<Scanner>>, Query(q): Query<UrlQuery>) -> Result<Response, ApiError> {
    lookup(&s, &q.url)
}

async fn record_by_path(State(s): State<Arc<Scanner>>, Path(url): Path<String>) -> Result<Response, ApiError> {
    lookup(&s, &url)
}

async fn health(State(s): State<Arc<Scanner>>) -> Json<serde_json::Value> {
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "status": "ok",
        "model_version": s.model_version(),
        "records": s.store().len(),
        "stats": s.stats(),
    }))
}

/// Serve the API on `listener` until the task is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, scanner: Arc<Scanner>) -> std::io::Result<()> {
    axum::serve(listener, router(scanner)).await
}
