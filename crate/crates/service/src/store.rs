//! Append-only JSON-lines blocklist with an in-memory latest-record index.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use phishscan_core::{EvasionCategory, Label};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{ScanRecord, ScanStatus, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("blocklist {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("blocklist {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("page size must be positive")]
    InvalidPageSize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordFilter {
    pub category: Option<EvasionCategory>,
    pub label: Option<Label>,
    pub status: Option<ScanStatus>,
    pub since: Option<DateTime<Utc>>,
    pub until: Option<DateTime<Utc>>,
}

impl RecordFilter {
    pub fn matches(&self, r: &ScanRecord) -> bool {
        self.category.is_none_or(|c| r.evasion == Some(c))
            && self.label.is_none_or(|l| r.label == Some(l))
            && self.status.is_none_or(|s| r.status == s)
            && self.since.is_none_or(|t| r.discovered_at >= t)
            && self.until.is_none_or(|t| r.discovered_at < t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordPage {
    pub schema_version: u32,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub pages: usize,
    pub records: Vec<ScanRecord>,
}

struct Inner {
    file: Option<File>,
    latest: HashMap<String, ScanRecord>,
}

pub struct BlocklistStore {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl BlocklistStore {
    /// A store that keeps records in memory only.
    pub fn in_memory() -> Self {
        BlocklistStore { path: None, inner: Mutex::new(Inner { file: None, latest: HashMap::new() }) }
    }

    /// Open (or create) the log at `path`, replaying existing records. A
    /// torn final line left by an interrupted write is ignored.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StoreError::Io { path: path.clone(), source };
        let mut latest = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            let lines: Vec<String> = reader.lines().collect::<Result<_, _>>().map_err(io)?;
            let last = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<ScanRecord>(line) {
                    Ok(r) => {
                        latest.insert(r.url.clone(), r);
                    }
                    Err(e) if i + 1 == last && !ends_with_newline(&path) => {
                        tracing::warn!(error = %e, "ignoring torn final blocklist line");
                    }
                    Err(e) => {
                        return Err(StoreError::Corrupt { path, line: i + 1, message: e.to_string() });
                    }
                }
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        Ok(BlocklistStore { path: Some(path), inner: Mutex::new(Inner { file: Some(file), latest }) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Append a record; it becomes the latest for its url.
    pub fn put(&self, record: &ScanRecord) -> Result<(), StoreError> {
        let mut inner = self.inner.lock();
        if let Some(file) = inner.file.as_mut() {
            let mut line = serde_json::to_string(record).expect("record serializes");
            line.push('\n');
            let path = self.path.clone().unwrap_or_default();
            file.write_all(line.as_bytes()).and_then(|_| file.flush()).map_err(|source| StoreError::Io { path, source })?;
        }
        inner.latest.insert(record.url.clone(), record.clone());
        Ok(())
    }

    pub fn get(&self, url: &str) -> Option<ScanRecord> {
        self.inner.lock().latest.get(url).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().latest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Latest records matching `filter`, ordered by discovery time then url.
    pub fn query(&self, filter: &RecordFilter) -> Vec<ScanRecord> {
        let mut out: Vec<ScanRecord> = self.inner.lock().latest.values().filter(|r| filter.matches(r)).cloned().collect();
        out.sort_by(|a, b| a.discovered_at.cmp(&b.discovered_at).then_with(|| a.url.cmp(&b.url)));
        out
    }

    /// One page (1-based) of [`query`](Self::query).
    pub fn list(&self, filter: &RecordFilter, page: usize, page_size: usize) -> Result<RecordPage, StoreError> {
        if page_size == 0 {
            return Err(StoreError::InvalidPageSize);
        }
        let all = self.query(filter);
        let total = all.len();
        let page = page.max(1);
        let records = all.into_iter().skip((page - 1) * page_size).take(page_size).collect();
        Ok(RecordPage { schema_version: SCHEMA_VERSION, page, page_size, total, pages: total.div_ceil(page_size), records })
    }
}

fn ends_with_newline(path: &Path) -> bool {
    std::fs::read(path).map(|b| b.last() == Some(&b'\n')).unwrap_or(true)
}
