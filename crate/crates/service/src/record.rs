//! Scan records, the unit persisted to the blocklist and served by the API.

use chrono::{DateTime, Utc};
use phishscan_core::{EvasionCategory, ExplainableWarning, Label, Verdict};
use serde::{Deserialize, Serialize};

/// Version of the record and API payload schema shared with the UI.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStatus {
    Completed,
    Inconclusive,
    FetchFailed,
}

/// How a follow-up page was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FollowVia {
    Link,
    Form,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowedLink {
    pub url: String,
    pub via: FollowVia,
    /// Absent when the child could not be fetched or scored.
    pub verdict: Option<Verdict>,
    pub status: ScanStatus,
}

/// The follow-up page that turned a benign-looking page into a phishing record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub via: FollowVia,
    pub url: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub schema_version: u32,
    pub url: String,
    pub ip: Option<String>,
    pub discovered_at: DateTime<Utc>,
    pub status: ScanStatus,
    /// Final label, including follow-up results; `None` unless completed.
    pub label: Option<Label>,
    /// Confidence backing `label`: the page's own, or the flagging child's.
    pub confidence: Option<f64>,
    /// Verdict on the page itself.
    pub verdict: Option<Verdict>,
    pub evasion: Option<EvasionCategory>,
    pub warning: Option<ExplainableWarning>,
    pub followed_links: Vec<FollowedLink>,
    pub provenance: Option<Provenance>,
    pub error: Option<String>,
    pub model_version: String,
}

impl ScanRecord {
    pub fn failed(url: &str, status: ScanStatus, error: String, model_version: String) -> Self {
        ScanRecord {
            schema_version: SCHEMA_VERSION,
            url: url.to_string(),
            ip: None,
            discovered_at: Utc::now(),
            status,
            label: None,
            confidence: None,
            verdict: None,
            evasion: None,
            warning: None,
            followed_links: Vec::new(),
            provenance: None,
            error: Some(error),
            model_version,
        }
    }

    pub fn is_phishing(&self) -> bool {
        self.label == Some(Label::Phishing)
    }

    /// The record with its timestamp cleared, for determinism comparisons.
    pub fn without_timestamp(&self) -> ScanRecord {
        ScanRecord { discovered_at: DateTime::<Utc>::UNIX_EPOCH, ..self.clone() }
    }

    /// Checks the record-level invariants.
    pub fn check(&self, max_follow_links: usize) -> Result<(), String> {
        if self.warning.is_some() && !self.is_phishing() {
            return Err(format!("{}: warning on a non-phishing record", self.url));
        }
        let links = self.followed_links.iter().filter(|f| f.via == FollowVia::Link).count();
        if links > max_follow_links {
            return Err(format!("{}: {links} followed links exceeds {max_follow_links}", self.url));
        }
        if self.followed_links.iter().filter(|f| f.via == FollowVia::Form).count() > 1 {
            return Err(format!("{}: more than one form follow-through", self.url));
        }
        if (self.status == ScanStatus::Completed) != self.label.is_some() {
            return Err(format!("{}: label must be set exactly for completed scans", self.url));
        }
        Ok(())
    }
}
