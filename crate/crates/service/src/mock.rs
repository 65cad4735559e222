//! In-process fixtures for tests and demos: a scripted web server and a
//! scorer driven by confidence markers embedded in page text.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use dashmap::DashMap;
use phishscan_core::{Chunk, Scorer, ScorerError};
use tokio::task::JoinHandle;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockResponse {
    Html(String),
    Redirect(String),
    Status(u16),
    Delayed(Duration, String),
    /// A body of this many bytes.
    Large(usize),
}

/// Web server answering from a fixed path table (query strings ignored) and
/// counting hits per path.
pub struct MockWeb {
    pub addr: SocketAddr,
    hits: Arc<DashMap<String, usize>>,
    task: JoinHandle<()>,
}

impl MockWeb {
    pub async fn start(routes: HashMap<String, MockResponse>) -> std::io::Result<Self> {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let routes = Arc::new(routes);
        let hits: Arc<DashMap<String, usize>> = Arc::new(DashMap::new());
        let h = hits.clone();
        let app = Router::new().fallback(move |uri: Uri| {
            let routes = routes.clone();
            let hits = h.clone();
            async move {
                let path = uri.path().to_string();
                *hits.entry(path.clone()).or_default() += 1;
                respond(routes.get(&path)).await
            }
        });
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(MockWeb { addr, hits, task })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn hits(&self, path: &str) -> usize {
        self.hits.get(path).map_or(0, |h| *h)
    }

    pub fn total_hits(&self) -> usize {
        self.hits.iter().map(|e| *e.value()).sum()
    }
}

impl Drop for MockWeb {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn respond(r: Option<&MockResponse>) -> Response {
    let html = |s: String| ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], s).into_response();
    match r {
        None => StatusCode::NOT_FOUND.into_response(),
        Some(MockResponse::Html(s)) => html(s.clone()),
        Some(MockResponse::Redirect(to)) => (StatusCode::FOUND, [(header::LOCATION, to.clone())]).into_response(),
        Some(MockResponse::Status(code)) => StatusCode::from_u16(*code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR).into_response(),
        Some(MockResponse::Delayed(d, s)) => {
            tokio::time::sleep(*d).await;
            html(s.clone())
        }
        Some(MockResponse::Large(n)) => html("a".repeat(*n)),
    }
}

/// Confidence marker a page can carry, e.g. `score41` for 0.41.
pub fn marker(confidence_percent: u32) -> String {
    format!("score{confidence_percent:02}")
}

/// Scores a chunk as the largest `scoreNN` marker it contains (NN/100), or
/// `default` when it has none.
pub struct MarkerScorer {
    pub default: f64,
}

impl Default for MarkerScorer {
    fn default() -> Self {
        MarkerScorer { default: 0.05 }
    }
}

impl Scorer for MarkerScorer {
    fn score(&self, chunk: &Chunk) -> Result<f64, ScorerError> {
        Ok(chunk
            .tokens
            .iter()
            .filter_map(|t| t.strip_prefix("score")?.parse::<u32>().ok())
            .map(|n| f64::from(n.min(100)) / 100.0)
            .reduce(f64::max)
            .unwrap_or(self.default))
    }

    fn version(&self) -> String {
        "marker-stub".into()
    }
}

/// Always fails as if the scoring backend were down.
pub struct DownScorer;

impl Scorer for DownScorer {
    fn score(&self, _: &Chunk) -> Result<f64, ScorerError> {
        Err(ScorerError::Unavailable("backend down".into()))
    }
}
