//! Staged stream processing: ingestion feeds a bounded queue drained by a
//! pool of scan workers, whose records flow into a bounded output queue.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex as SyncMutex;
use phishscan_core::config::ServiceConfig;
use tokio::sync::{mpsc, Mutex};
use tokio::task::JoinSet;

use crate::ingest::{self, Allowlist, Backoff, Candidate, IngestError, IngestFilter, IngestStats};
use crate::record::ScanRecord;
use crate::scanner::Scanner;

/// Drain `rx` with `workers` concurrent scanners, sending each record to
/// `out`. Returns when `rx` is exhausted.
pub async fn scan_stream(
    scanner: Arc<Scanner>,
    rx: mpsc::Receiver<Candidate>,
    workers: usize,
    out: mpsc::Sender<ScanRecord>,
) {
    let rx = Arc::new(Mutex::new(rx));
    let mut set = JoinSet::new();
    for _ in 0..workers.max(1) {
        let (rx, scanner, out) = (rx.clone(), scanner.clone(), out.clone());
        set.spawn(async move {
            loop {
                let next = rx.lock().await.recv().await;
                let Some(c) = next else { break };
                match scanner.scan_url(&c.url).await {
                    Ok(r) => {
                        if out.send(r).await.is_err() {
                            break;
                        }
                    }
                    Err(e) => tracing::error!(url = %c.url, error = %e, "scan failed"),
                }
            }
        });
    }
    while let Some(joined) = set.join_next().await {
        if let Err(e) = joined {
            tracing::error!(error = %e, "scan worker panicked");
        }
    }
}

pub fn ingest_filter(config: &ServiceConfig) -> Result<IngestFilter, IngestError> {
    let allowlist = match &config.allowlist_path {
        Some(p) => Allowlist::load(p)?,
        None => Allowlist::default(),
    };
    Ok(IngestFilter::new(Duration::from_secs(config.dedup_window_hours * 3600), allowlist))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    /// One record per admitted url, sorted by url.
    pub records: Vec<ScanRecord>,
    pub stats: IngestStats,
}

/// Scan every admitted url of a replay file.
pub async fn replay(scanner: Arc<Scanner>, path: &Path, rate_per_sec: Option<f64>) -> Result<ReplayOutcome, IngestError> {
    let config = scanner.service_config().clone();
    let filter = Arc::new(SyncMutex::new(ingest_filter(&config)?));
    let cap = config.queue_capacity.max(1);
    let (tx, rx) = mpsc::channel(cap);
    let (out_tx, mut out_rx) = mpsc::channel(cap);
    let workers = tokio::spawn(scan_stream(scanner, rx, config.fetch_workers, out_tx));
    let collector = tokio::spawn(async move {
        let mut records = Vec::new();
        while let Some(r) = out_rx.recv().await {
            records.push(r);
        }
        records
    });
    let stats = ingest::run_replay(path, filter, tx, rate_per_sec).await;
    workers.await.expect("scan workers");
    let mut records = collector.await.expect("collector");
    records.sort_by(|a, b| a.url.cmp(&b.url));
    Ok(ReplayOutcome { records, stats: stats? })
}

/// Scan the live feed until it gives up; records go to the store only.
pub async fn run_live(scanner: Arc<Scanner>, backoff: Backoff) -> Result<IngestStats, IngestError> {
    let config = scanner.service_config().clone();
    let filter = Arc::new(SyncMutex::new(ingest_filter(&config)?));
    let cap = config.queue_capacity.max(1);
    let (tx, rx) = mpsc::channel(cap);
    let (out_tx, mut out_rx) = mpsc::channel::<ScanRecord>(cap);
    let workers = tokio::spawn(scan_stream(scanner, rx, config.fetch_workers, out_tx));
    let drain = tokio::spawn(async move {
        while let Some(r) = out_rx.recv().await {
            tracing::info!(url = %r.url, status = ?r.status, label = ?r.label, "scanned");
        }
    });
    let result = ingest::run_live_feed(&config.feed_url, filter, tx, backoff).await;
    workers.await.expect("scan workers");
    drain.await.expect("drain");
    result
}
