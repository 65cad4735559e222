use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Duration;

use futures::SinkExt;
use parking_lot::Mutex;
use phishscan_core::Config;
use phishscan_service::ingest::{run_live_feed, Backoff, IngestError};
use phishscan_service::mock::{marker, MarkerScorer, MockResponse, MockWeb};
use phishscan_service::{replay, Allowlist, BlocklistStore, IngestFilter, Scanner};
use tokio::sync::mpsc;
use tokio_tungstenite::tungstenite::Message;

fn cert(domains: &[&str]) -> String {
    serde_json::json!({"message_type": "certificate_update", "data": {"leaf_cert": {"all_domains": domains}}}).to_string()
}

/// A feed that sends one batch per connection and then drops it.
async fn flaky_feed(batches: Vec<Vec<String>>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        for batch in batches {
            let (stream, _) = listener.accept().await.unwrap();
            let mut ws = tokio_tungstenite::accept_async(stream).await.unwrap();
            for m in batch {
                ws.send(Message::Text(m.into())).await.unwrap();
            }
            // abrupt disconnect, no close frame
            drop(ws);
        }
    });
    format!("ws://{addr}/")
}

#[tokio::test]
async fn live_feed_reconnects_without_duplicates() {
    let endpoint = flaky_feed(vec![
        vec![cert(&["a.test", "*.b.test"]), cert(&["c.test"]), "{\"message_type\":\"heartbeat\"}".into()],
        vec![cert(&["a.test", "d.test"]), cert(&["www.google.com"])],
        vec![cert(&["b.test", "e.test"])],
    ])
    .await;
    let filter = Arc::new(Mutex::new(IngestFilter::new(Duration::from_secs(3600), Allowlist::new(["google.com"]))));
    let (tx, mut rx) = mpsc::channel(16);
    let backoff = Backoff { initial: Duration::from_millis(10), max: Duration::from_millis(50), max_attempts: Some(3) };
    let feed = tokio::spawn({
        let filter = filter.clone();
        async move { run_live_feed(&endpoint, filter, tx, backoff).await }
    });
    let mut got = Vec::new();
    while got.len() < 5 {
        got.push(tokio::time::timeout(Duration::from_secs(5), rx.recv()).await.unwrap().unwrap().url);
    }
    assert_eq!(got, ["https://a.test/", "https://b.test/", "https://c.test/", "https://d.test/", "https://e.test/"]);
    // the server is gone now: reconnects are exhausted
    let result = tokio::time::timeout(Duration::from_secs(5), feed).await.unwrap().unwrap();
    assert!(matches!(result, Err(IngestError::ReconnectsExhausted(3))));
    assert!(rx.try_recv().is_err());
    let stats = filter.lock().stats();
    assert_eq!((stats.emitted, stats.duplicates, stats.allowlisted), (5, 2, 1));
}

#[tokio::test]
async fn replay_is_deduplicated_allowlisted_and_deterministic() {
    let mut routes = HashMap::new();
    for i in 0..40 {
        let score = [5, 41, 97][i % 3];
        routes.insert(format!("/s{i}"), MockResponse::Html(format!("<p>site {i} {}</p><a href=\"/s{}\">n</a>", marker(score as u32), (i + 1) % 40)));
    }
    let web = MockWeb::start(routes).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut lines: Vec<String> = (0..40).map(|i| web.url(&format!("/s{i}"))).collect();
    lines.extend((0..10).map(|i| web.url(&format!("/s{i}"))));
    lines.push("https://www.allowed.test/".into());
    lines.push("garbage".into());
    let replay_path = dir.path().join("replay.txt");
    std::fs::write(&replay_path, lines.join("\n")).unwrap();
    let allow_path = dir.path().join("allow.txt");
    std::fs::write(&allow_path, "allowed.test\n").unwrap();

    let mut config = Config::default();
    config.service.fetch_rate_per_sec = 0.0;
    config.service.allowlist_path = Some(allow_path);
    config.service.fetch_workers = 6;
    config.explainer.importance.samples = 40;
    let run = || async {
        let s = Scanner::new(&config, Arc::new(MarkerScorer::default()), Arc::new(BlocklistStore::in_memory())).unwrap();
        replay(Arc::new(s), &replay_path, None).await.unwrap()
    };
    let a = run().await;
    let b = run().await;
    assert_eq!(a.records.len(), 40);
    assert_eq!((a.stats.duplicates, a.stats.allowlisted, a.stats.invalid), (10, 1, 1));
    let strip = |o: &phishscan_service::ReplayOutcome| o.records.iter().map(|r| r.without_timestamp()).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
    let urls: HashSet<_> = a.records.iter().map(|r| r.url.clone()).collect();
    assert_eq!(urls.len(), 40);
}
