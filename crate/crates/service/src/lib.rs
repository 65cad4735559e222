//! Long-running scan service: URL ingestion from a certificate-transparency
//! feed or replay file, bounded fetching, page classification with link and
//! form follow-ups, a JSON-lines blocklist, report sinks and an HTTP API.

pub mod api;
pub mod fetch;
pub mod generator;
pub mod ingest;
pub mod mock;
pub mod pipeline;
pub mod probe;
pub mod ratelimit;
pub mod record;
pub mod report;
pub mod scanner;
pub mod store;

pub use api::{router, serve, ScanRequest};
pub use fetch::{FetchError, FetchedPage, HttpFetcher};
pub use generator::HttpGenerator;
pub use ingest::{Allowlist, Candidate, IngestFilter, StreamSource};
pub use pipeline::{replay, run_live, scan_stream, ReplayOutcome};
pub use record::{FollowVia, FollowedLink, Provenance, ScanRecord, ScanStatus, SCHEMA_VERSION};
pub use report::{ReportPayload, ReportQueue};
pub use scanner::{ScanError, Scanner};
pub use store::{BlocklistStore, RecordFilter, RecordPage, StoreError};
