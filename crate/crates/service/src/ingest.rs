//! Candidate URL sources: the certificate-transparency websocket feed and
//! replay files, both passed through deduplication and an allowlist.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, TimeDelta, Utc};
use futures::StreamExt;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;
use url::Url;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("replay file {path}: {source}")]
    Replay { path: PathBuf, source: std::io::Error },
    #[error("allowlist {path}: {source}")]
    Allowlist { path: PathBuf, source: std::io::Error },
    #[error("live feed gave up after {0} reconnect attempts")]
    ReconnectsExhausted(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StreamSource {
    LiveFeed { endpoint: String, rate_per_sec: Option<f64> },
    ReplayFile { path: PathBuf, rate_per_sec: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub url: String,
    pub observed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    Invalid,
    Duplicate,
    Allowlisted(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub emitted: usize,
    pub invalid: usize,
    pub duplicates: usize,
    pub allowlisted: usize,
}

/// Canonical form of a candidate URL; only http(s) URLs with a host qualify.
pub fn normalize_url(raw: &str) -> Option<String> {
    let mut u = Url::parse(raw.trim()).ok()?;
    if !matches!(u.scheme(), "http" | "https") || u.host_str().is_none_or(str::is_empty) {
        return None;
    }
    u.set_fragment(None);
    Some(u.to_string())
}

/// Domains whose pages are never scanned. Matching is by whole-label
/// suffix, so `example.com` covers `www.example.com` but not `badexample.com`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Allowlist {
    domains: Vec<String>,
}

impl Allowlist {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(domains: I) -> Self {
        let mut domains: Vec<String> = domains
            .into_iter()
            .map(|d| d.as_ref().trim().trim_start_matches("*.").trim_end_matches('.').to_ascii_lowercase())
            .filter(|d| !d.is_empty())
            .collect();
        domains.sort();
        domains.dedup();
        Allowlist { domains }
    }

    /// One domain per line; `rank,domain` lines (top-sites lists) are
    /// accepted, and `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        Allowlist::new(text.lines().filter_map(|l| {
            let l = l.split('#').next()?.trim();
            let d = l.rsplit(',').next()?.trim();
            (!d.is_empty()).then_some(d)
        }))
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| IngestError::Allowlist { path: path.to_path_buf(), source })?;
        Ok(Allowlist::parse(&text))
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// The allowlisted domain covering `host`, if any.
    pub fn matching(&self, host: &str) -> Option<&str> {
        let host = host.trim_end_matches('.').to_ascii_lowercase();
        let mut suffix = host.as_str();
        loop {
            if let Ok(i) = self.domains.binary_search_by(|d| d.as_str().cmp(suffix)) {
                return Some(&self.domains[i]);
            }
            suffix = suffix.split_once('.')?.1;
        }
    }
}

/// Sliding-window URL deduplication plus allowlist filtering.
#[derive(Debug)]
pub struct IngestFilter {
    window: TimeDelta,
    seen: HashMap<String, DateTime<Utc>>,
    allowlist: Allowlist,
    stats: IngestStats,
}

impl IngestFilter {
    pub fn new(window: Duration, allowlist: Allowlist) -> Self {
        IngestFilter {
            window: TimeDelta::from_std(window).unwrap_or(TimeDelta::MAX),
            seen: HashMap::new(),
            allowlist,
            stats: IngestStats::default(),
        }
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Admit `raw` observed at `at`, returning its canonical form.
    pub fn admit(&mut self, raw: &str, at: DateTime<Utc>) -> Result<String, DropReason> {
        let outcome = self.check(raw, at);
        match &outcome {
            Ok(_) => self.stats.emitted += 1,
            Err(DropReason::Invalid) => {
                self.stats.invalid += 1;
                tracing::debug!(url = raw, "dropped invalid candidate");
            }
            Err(DropReason::Duplicate) => self.stats.duplicates += 1,
            Err(DropReason::Allowlisted(d)) => {
                self.stats.allowlisted += 1;
                tracing::debug!(url = raw, domain = %d, "dropped allowlisted candidate");
            }
        }
        outcome
    }

    fn check(&mut self, raw: &str, at: DateTime<Utc>) -> Result<String, DropReason> {
        let url = normalize_url(raw).ok_or(DropReason::Invalid)?;
        let host = Url::parse(&url).ok().and_then(|u| u.host_str().map(str::to_string)).unwrap_or_default();
        if let Some(d) = self.allowlist.matching(&host) {
            return Err(DropReason::Allowlisted(d.to_string()));
        }
        if let Some(prev) = self.seen.get(&url) {
            if at.signed_duration_since(*prev) < self.window {
                return Err(DropReason::Duplicate);
            }
        }
        if self.seen.len() >= 1 << 20 {
            let window = self.window;
            self.seen.retain(|_, t| at.signed_duration_since(*t) < window);
        }
        self.seen.insert(url.clone(), at);
        Ok(url)
    }
}

/// Parse a replay file: one URL per line, optionally preceded by an RFC 3339
/// or unix-seconds timestamp (whitespace or comma separated). Lines without
/// a timestamp inherit the previous line's, starting from `start`.
pub fn parse_replay(text: &str, start: DateTime<Utc>) -> Vec<(DateTime<Utc>, String)> {
    let mut at = start;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (stamp, rest) = match line.split_once(|c: char| c.is_whitespace() || c == ',') {
            Some((a, b)) => (parse_timestamp(a), b.trim()),
            None => (None, line),
        };
        match stamp {
            Some(t) => {
                at = t;
                out.push((at, rest.to_string()));
            }
            None => out.push((at, line.to_string())),
        }
    }
    out
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    let secs: i64 = s.parse().ok()?;
    DateTime::from_timestamp(secs, 0)
}

/// Stream a replay file through `filter` into `tx`; ends cleanly at EOF or
/// when the receiver is dropped.
pub async fn run_replay(
    path: &Path,
    filter: Arc<Mutex<IngestFilter>>,
    tx: mpsc::Sender<Candidate>,
    rate_per_sec: Option<f64>,
) -> Result<IngestStats, IngestError> {
    let text = tokio::fs::read_to_string(path)
        .await
        .map_err(|source| IngestError::Replay { path: path.to_path_buf(), source })?;
    let bucket = crate::ratelimit::TokenBucket::new(rate_per_sec.unwrap_or(0.0));
    for (at, raw) in parse_replay(&text, Utc::now()) {
        let admitted = filter.lock().admit(&raw, at);
        if let Ok(url) = admitted {
            bucket.acquire().await;
            if tx.send(Candidate { url, observed_at: at }).await.is_err() {
                break;
            }
        }
    }
    let stats = filter.lock().stats();
    Ok(stats)
}

/// Domains carried by one feed message: `all_domains` of a certificate
/// update, or the bare array of a domains-only message.
pub fn feed_domains(message: &str) -> Vec<String> {
    let Ok(v) = serde_json::from_str::<serde_json::Value>(message) else {
        return Vec::new();
    };
    let list = match v.get("message_type").and_then(|t| t.as_str()) {
        Some("certificate_update") => v.pointer("/data/leaf_cert/all_domains"),
        Some("dns_entries") => v.get("data"),
        _ => None,
    };
    list.and_then(|l| l.as_array())
        .map(|a| a.iter().filter_map(|d| d.as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

/// Candidate URL for a certificate domain; wildcards map to their base.
pub fn domain_url(domain: &str) -> String {
    format!("https://{}/", domain.trim().trim_start_matches("*."))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub initial: Duration,
    pub max: Duration,
    /// Give up after this many consecutive failed attempts.
    pub max_attempts: Option<usize>,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff { initial: Duration::from_secs(1), max: Duration::from_secs(60), max_attempts: None }
    }
}

impl Backoff {
    /// Delay before reconnect attempt `attempt` (0-based).
    pub fn delay(&self, attempt: usize) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(31) as u32).unwrap_or(u32::MAX);
        self.initial.saturating_mul(factor).min(self.max)
    }
}

/// Consume the live feed until the receiver is dropped, reconnecting with
/// exponential backoff. The shared filter keeps URLs seen before a
/// disconnect from being emitted again.
pub async fn run_live_feed(
    endpoint: &str,
    filter: Arc<Mutex<IngestFilter>>,
    tx: mpsc::Sender<Candidate>,
    backoff: Backoff,
) -> Result<IngestStats, IngestError> {
    let mut failures = 0usize;
    loop {
        match tokio_tungstenite::connect_async(endpoint).await {
            Ok((mut ws, _)) => {
                tracing::info!(endpoint, "connected to live feed");
                failures = 0;
                while let Some(msg) = ws.next().await {
                    let text = match msg {
                        Ok(Message::Text(t)) => t.to_string(),
                        Ok(Message::Binary(b)) => String::from_utf8_lossy(&b).into_owned(),
                        Ok(Message::Close(_)) => break,
                        Ok(_) => continue,
                        Err(e) => {
                            tracing::warn!(error = %e, "live feed read failed");
                            break;
                        }
                    };
                    let now = Utc::now();
                    for d in feed_domains(&text) {
                        let admitted = filter.lock().admit(&domain_url(&d), now);
                        if let Ok(url) = admitted {
                            if tx.send(Candidate { url, observed_at: now }).await.is_err() {
                                return Ok(filter.lock().stats());
                            }
                        }
                    }
                }
                tracing::warn!(endpoint, "live feed disconnected");
            }
            Err(e) => {
                tracing::warn!(endpoint, error = %e, "live feed connect failed");
                failures += 1;
                if backoff.max_attempts.is_some_and(|m| failures >= m) {
                    return Err(IngestError::ReconnectsExhausted(failures));
                }
            }
        }
        if tx.is_closed() {
            return Ok(filter.lock().stats());
        }
        tokio::time::sleep(backoff.delay(failures.saturating_sub(1))).await;
    }
}
