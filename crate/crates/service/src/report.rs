//! Report queue: one payload file per configured sink for each phishing
//! record. Nothing is submitted to third parties.

use std::path::PathBuf;

use chrono::{DateTime, Utc};
use phishscan_core::config::SinkConfig;
use phishscan_core::{EvasionCategory, ExplainableWarning};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::record::ScanRecord;

pub const PAYLOAD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("only phishing records can be reported ({0})")]
    NotPhishing(String),
    #[error("sink {sink}: {source}")]
    Io { sink: String, source: std::io::Error },
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportPayload {
    pub schema_version: u32,
    pub sink: String,
    pub url: String,
    pub ip: Option<String>,
    pub discovered_at: DateTime<Utc>,
    pub confidence: f64,
    pub category: Option<EvasionCategory>,
    /// Parsed representation of the flagged page.
    pub parsed_text: String,
    pub warning: Option<ExplainableWarning>,
}

impl ReportPayload {
    /// Strict parse of a payload file.
    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let p: ReportPayload = serde_json::from_str(text).map_err(|e| ReportError::InvalidPayload(e.to_string()))?;
        if p.schema_version != PAYLOAD_SCHEMA_VERSION {
            return Err(ReportError::InvalidPayload(format!("unsupported schema version {}", p.schema_version)));
        }
        if url::Url::parse(&p.url).is_err() {
            return Err(ReportError::InvalidPayload(format!("bad url {}", p.url)));
        }
        if !(0.0..=1.0).contains(&p.confidence) {
            return Err(ReportError::InvalidPayload(format!("confidence {} out of range", p.confidence)));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportQueue {
    sinks: Vec<SinkConfig>,
}

impl ReportQueue {
    pub fn new(sinks: Vec<SinkConfig>) -> Self {
        ReportQueue { sinks }
    }

    pub fn is_empty(&self) -> bool {
        self.sinks.is_empty()
    }

    /// Write one payload per sink and return the file paths.
    pub fn enqueue(&self, record: &ScanRecord, parsed_text: &str) -> Result<Vec<PathBuf>, ReportError> {
        if !record.is_phishing() {
            return Err(ReportError::NotPhishing(record.url.clone()));
        }
        let id = hex::encode(&Sha256::digest(record.url.as_bytes())[..8]);
        let mut paths = Vec::with_capacity(self.sinks.len());
        for sink in &self.sinks {
            let payload = ReportPayload {
                schema_version: PAYLOAD_SCHEMA_VERSION,
                sink: sink.name.clone(),
                url: record.url.clone(),
                ip: record.ip.clone(),
                discovered_at: record.discovered_at,
                confidence: record.confidence.unwrap_or(0.0),
                category: record.evasion,
                parsed_text: parsed_text.to_string(),
                warning: record.warning.clone(),
            };
            let io = |source| ReportError::Io { sink: sink.name.clone(), source };
            std::fs::create_dir_all(&sink.dir).map_err(io)?;
            let path = sink.dir.join(format!("{id}.json"));
            let text = serde_json::to_string_pretty(&payload).expect("payload serializes");
            std::fs::write(&path, text).map_err(io)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::ScanStatus;
    use phishscan_core::Label;

    fn record(label: Label) -> ScanRecord {
        let mut r = ScanRecord::failed("http://evil.test/login", ScanStatus::Completed, String::new(), "m".into());
        r.error = None;
        r.label = Some(label);
        r.confidence = Some(0.97);
        r.evasion = Some(EvasionCategory::Regular);
        r
    }

    #[test]
    fn one_payload_per_sink_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let q = ReportQueue::new(vec![
            SinkConfig { name: "gsb".into(), dir: dir.path().join("gsb") },
            SinkConfig { name: "openphish".into(), dir: dir.path().join("op") },
        ]);
        let paths = q.enqueue(&record(Label::Phishing), "<form>\n</form>").unwrap();
        assert_eq!(paths.len(), 2);
        for (p, sink) in paths.iter().zip(["gsb", "openphish"]) {
            let payload = ReportPayload::parse(&std::fs::read_to_string(p).unwrap()).unwrap();
            assert_eq!(payload.sink, sink);
            assert_eq!(payload.url, "http://evil.test/login");
            assert_eq!(payload.parsed_text, "<form>\n</form>");
        }
    }

    #[test]
    fn benign_records_are_rejected() {
        let q = ReportQueue::new(vec![]);
        assert!(matches!(q.enqueue(&record(Label::Benign), ""), Err(ReportError::NotPhishing(_))));
    }

    #[test]
    fn malformed_payloads_fail_validation() {
        assert!(ReportPayload::parse("{}").is_err());
        let dir = tempfile::tempdir().unwrap();
        let q = ReportQueue::new(vec![SinkConfig { name: "s".into(), dir: dir.path().into() }]);
        let p = q.enqueue(&record(Label::Phishing), "").unwrap().remove(0);
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(ReportPayload::parse(&v.to_string()).is_err());
        v.as_object_mut().unwrap().remove("extra");
        v["confidence"] = serde_json::json!(3.0);
        assert!(ReportPayload::parse(&v.to_string()).is_err());
    }
}
