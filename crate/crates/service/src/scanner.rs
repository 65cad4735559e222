//! Single-URL scanning with follow-up policies, caching and per-url mutual
//! exclusion.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use chrono::{TimeDelta, Utc};
use dashmap::DashMap;
use phishscan_core::config::{Config, ServiceConfig};
use phishscan_core::explainer::{explain, Codebook, ImportanceConfig, WarningGenerator};
use phishscan_core::parser::{self, extract_forms, extract_links, parse_bytes_with_probe, ActionProbe, ProbeMode};
use phishscan_core::{
    detector, profile, render_parsed_text, EvasionCategory, ExplainableWarning, Label, ParsedDocument, PipelineConfig,
    Scorer, ScorerError, Verdict,
};
use serde::Serialize;
use thiserror::Error;
use tokio::sync::{Mutex, Semaphore};

use crate::fetch::{placeholder_submission, FetchError, FetchLimits, FetchedPage, FormSubmission, HttpFetcher};
use crate::ingest::normalize_url;
use crate::probe::NetworkProbe;
use crate::record::{FollowVia, FollowedLink, Provenance, ScanRecord, ScanStatus, SCHEMA_VERSION};
use crate::report::ReportQueue;
use crate::store::{BlocklistStore, StoreError};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid url: {0}")]
    InvalidUrl(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("fetcher setup: {0}")]
    Setup(#[from] FetchError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ScanStats {
    pub scans: usize,
    pub cache_hits: usize,
}

/// A classified page.
struct Analysis {
    doc: ParsedDocument,
    html: String,
    verdict: Verdict,
    evasion: EvasionCategory,
}

/// State shared with blocking classification tasks.
struct Engine {
    pipeline: PipelineConfig,
    scorer: Arc<dyn Scorer>,
    probe: Option<NetworkProbe>,
    importance: ImportanceConfig,
    codebook: Codebook,
    generator: Option<Arc<dyn WarningGenerator>>,
}

impl Engine {
    fn analyse(&self, page: &FetchedPage) -> Result<Analysis, ScorerError> {
        let html = parser::decode_page(&page.body, &self.pipeline.patches);
        let probe = self.probe.as_ref().map(|p| p as &dyn ActionProbe);
        let doc = parse_bytes_with_probe(&page.body, &page.url, &self.pipeline.patches, probe);
        let verdict = match detector::classify_document(&*self.scorer, &doc, &self.pipeline.window, self.pipeline.threshold)
        {
            Ok(v) => v,
            Err(detector::DetectorError::Scorer(e)) => return Err(e),
            Err(e) => return Err(ScorerError::Protocol(e.to_string())),
        };
        let evasion = profile(html.as_bytes(), &doc).category;
        Ok(Analysis { doc, html, verdict, evasion })
    }

    fn warn(&self, doc: &ParsedDocument, url: &str) -> Option<ExplainableWarning> {
        let generator = self.generator.as_deref();
        match explain(doc, url, &*self.scorer, &self.pipeline, &self.importance, &self.codebook, generator) {
            Ok(e) => Some(e.warning),
            Err(e) => {
                tracing::warn!(url, error = %e, "no warning generated");
                None
            }
        }
    }
}

pub struct Scanner {
    engine: Arc<Engine>,
    fetcher: HttpFetcher,
    store: Arc<BlocklistStore>,
    reports: ReportQueue,
    service: ServiceConfig,
    locks: DashMap<String, Arc<Mutex<()>>>,
    classify_slots: Arc<Semaphore>,
    scans: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl Scanner {
    pub fn new(config: &Config, scorer: Arc<dyn Scorer>, store: Arc<BlocklistStore>) -> Result<Self, ScanError> {
        let service = config.service.clone();
        let limits = FetchLimits::from(&service);
        let probe = (config.pipeline.patches.action_probe_mode == ProbeMode::Network)
            .then(|| NetworkProbe::new(Duration::from_secs(5).min(limits.timeout)));
        let engine = Engine {
            pipeline: config.pipeline,
            scorer,
            probe,
            importance: config.explainer.importance,
            codebook: Codebook::default(),
            generator: None,
        };
        Ok(Scanner {
            engine: Arc::new(engine),
            fetcher: HttpFetcher::new(limits)?,
            store,
            reports: ReportQueue::new(service.sinks.clone()),
            classify_slots: Arc::new(Semaphore::new(service.classify_workers.max(1))),
            service,
            locks: DashMap::new(),
            scans: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        })
    }

    /// Use an external warning generator instead of the template rules.
    pub fn with_generator(mut self, generator: Arc<dyn WarningGenerator>) -> Self {
        Arc::get_mut(&mut self.engine).expect("engine not yet shared").generator = Some(generator);
        self
    }

    pub fn store(&self) -> &Arc<BlocklistStore> {
        &self.store
    }

    pub fn service_config(&self) -> &ServiceConfig {
        &self.service
    }

    pub fn model_version(&self) -> String {
        self.engine.scorer.version()
    }

    pub fn stats(&self) -> ScanStats {
        ScanStats { scans: self.scans.load(Ordering::Relaxed), cache_hits: self.cache_hits.load(Ordering::Relaxed) }
    }

    /// A stored record that is still valid: phishing records never expire,
    /// completed benign ones expire after the TTL, failures are rescanned.
    pub fn cached(&self, url: &str) -> Option<ScanRecord> {
        let r = self.store.get(url)?;
        let ttl = TimeDelta::hours(self.service.benign_ttl_hours as i64);
        let fresh = match (r.status, r.label) {
            (ScanStatus::Completed, Some(Label::Phishing)) => true,
            (ScanStatus::Completed, Some(_)) => Utc::now().signed_duration_since(r.discovered_at) < ttl,
            _ => false,
        };
        fresh.then_some(r)
    }

    /// Scan `url` (or return its cached record) and persist the result.
    pub async fn scan_url(&self, url: &str) -> Result<ScanRecord, ScanError> {
        let url = normalize_url(url).ok_or_else(|| ScanError::InvalidUrl(url.to_string()))?;
        let lock = self.locks.entry(url.clone()).or_default().clone();
        let guard = lock.lock().await;
        let result = match self.cached(&url) {
            Some(r) => {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                Ok(r)
            }
            None => {
                self.scans.fetch_add(1, Ordering::Relaxed);
                let (record, parsed) = self.scan_uncached(&url).await;
                self.store.put(&record)?;
                if record.is_phishing() && !self.reports.is_empty() {
                    if let Err(e) = self.reports.enqueue(&record, &parsed) {
                        tracing::warn!(url = %record.url, error = %e, "report queue write failed");
                    }
                }
                Ok(record)
            }
        };
        drop(guard);
        drop(lock);
        self.locks.remove_if(&url, |_, l| Arc::strong_count(l) == 1);
        result
    }

    async fn classify(&self, page: FetchedPage) -> Result<Analysis, ScorerError> {
        let _permit = self.classify_slots.clone().acquire_owned().await.expect("semaphore open");
        let engine = self.engine.clone();
        tokio::task::spawn_blocking(move || engine.analyse(&page)).await.expect("classification task panicked")
    }

    async fn scan_child(&self, target: Result<String, FormSubmission>, via: FollowVia) -> (FollowedLink, Option<Analysis>) {
        let (url, fetched) = match target {
            Ok(url) => (url.clone(), self.fetcher.fetch(&url).await),
            Err(form) => (form.url.clone(), self.fetcher.submit(&form).await),
        };
        let outcome = match fetched {
            Err(e) => Err((ScanStatus::FetchFailed, e.to_string())),
            Ok(page) => self.classify(page).await.map_err(|e| (ScanStatus::Inconclusive, e.to_string())),
        };
        match outcome {
            Ok(a) => (FollowedLink { url, via, verdict: Some(a.verdict.clone()), status: ScanStatus::Completed }, Some(a)),
            Err((status, error)) => {
                tracing::debug!(%url, %error, "follow-up failed");
                (FollowedLink { url, via, verdict: None, status }, None)
            }
        }
    }

    async fn scan_uncached(&self, url: &str) -> (ScanRecord, String) {
        let model_version = self.model_version();
        let page = match self.fetcher.fetch(url).await {
            Ok(p) => p,
            Err(e) => return (ScanRecord::failed(url, ScanStatus::FetchFailed, e.to_string(), model_version), String::new()),
        };
        let ip = page.ip.clone();
        let page_url = page.url.clone();
        let analysis = match self.classify(page).await {
            Ok(a) => a,
            Err(e) => {
                let mut r = ScanRecord::failed(url, ScanStatus::Inconclusive, e.to_string(), model_version);
                r.ip = ip;
                return (r, String::new());
            }
        };

        let mut followed = Vec::new();
        let mut flagged: Option<(Provenance, Analysis)> = None;
        let conf = analysis.verdict.confidence;
        let (low, high) = self.service.follow_band;
        if !analysis.verdict.is_phishing() && conf >= low && conf < high {
            let links = extract_links(&analysis.html, &page_url);
            for link in links.into_iter().take(self.service.max_follow_links) {
                let (f, child) = self.scan_child(Ok(link.to_string()), FollowVia::Link).await;
                followed.push(f);
                if let Some(c) = child.filter(|c| c.verdict.is_phishing()) {
                    let p = Provenance { via: FollowVia::Link, url: link.to_string(), confidence: c.verdict.confidence };
                    flagged = Some((p, c));
                    break;
                }
            }
        }
        if !analysis.verdict.is_phishing() && flagged.is_none() && self.service.form_follow_through {
            if let Some(submission) = pick_form(&analysis.html, &page_url) {
                let target = submission.url.clone();
                let (f, child) = self.scan_child(Err(submission), FollowVia::Form).await;
                followed.push(f);
                if let Some(c) = child.filter(|c| c.verdict.is_phishing()) {
                    let p = Provenance { via: FollowVia::Form, url: target, confidence: c.verdict.confidence };
                    flagged = Some((p, c));
                }
            }
        }

        let (label, confidence, provenance, evidence) = match (&flagged, analysis.verdict.is_phishing()) {
            (_, true) => (Label::Phishing, conf, None, Some((&analysis.doc, page_url.clone()))),
            (Some((p, c)), false) => (Label::Phishing, p.confidence, Some(p.clone()), Some((&c.doc, p.url.clone()))),
            (None, false) => (Label::Benign, conf, None, None),
        };
        let parsed = evidence.as_ref().map(|(d, _)| render_parsed_text(d)).unwrap_or_default();
        let warning = match evidence.filter(|_| self.service.warnings) {
            Some((doc, wurl)) => {
                let _permit = self.classify_slots.clone().acquire_owned().await.expect("semaphore open");
                let engine = self.engine.clone();
                let doc = doc.clone();
                tokio::task::spawn_blocking(move || engine.warn(&doc, &wurl)).await.expect("warning task panicked")
            }
            None => None,
        };
        let record = ScanRecord {
            schema_version: SCHEMA_VERSION,
            url: url.to_string(),
            ip,
            discovered_at: Utc::now(),
            status: ScanStatus::Completed,
            label: Some(label),
            confidence: Some(confidence),
            verdict: Some(analysis.verdict),
            evasion: Some(analysis.evasion),
            warning,
            followed_links: followed,
            provenance,
            error: None,
            model_version,
        };
        (record, parsed)
    }
}

/// The form to follow through: the first one collecting credentials, else
/// the first submittable one.
fn pick_form(html: &str, page_url: &str) -> Option<FormSubmission> {
    let forms = extract_forms(html, true);
    let credential = |f: &parser::FormInfo| {
        f.fields.iter().any(|x| matches!(x.input_type.as_str(), "password" | "email"))
    };
    forms
        .iter()
        .filter(|f| credential(f))
        .chain(forms.iter().filter(|f| !credential(f)))
        .find_map(|f| placeholder_submission(f, page_url))
}
