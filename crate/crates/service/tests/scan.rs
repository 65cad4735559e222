use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use phishscan_core::config::SinkConfig;
use phishscan_core::detector::CountingScorer;
use phishscan_core::explainer::GeneratorKind;
use phishscan_core::{Config, Label, Scorer};
use phishscan_service::mock::{marker, DownScorer, MarkerScorer, MockResponse, MockWeb};
use phishscan_service::{BlocklistStore, FollowVia, HttpGenerator, ReportPayload, ScanStatus, Scanner};

fn html(title: &str, body: &str) -> MockResponse {
    MockResponse::Html(format!("<html><head><title>{title}</title></head><body>{body}</body></html>"))
}

fn config() -> Config {
    let mut c = Config::default();
    c.service.fetch_rate_per_sec = 0.0;
    c.service.fetch_timeout_secs = 2;
    c.explainer.importance.samples = 80;
    c
}

fn scanner_with(c: &Config, scorer: Arc<dyn Scorer>) -> Scanner {
    Scanner::new(c, scorer, Arc::new(BlocklistStore::in_memory())).unwrap()
}

fn site() -> HashMap<String, MockResponse> {
    let mut r = HashMap::new();
    r.insert("/benign".into(), html("News", &format!("<h1>Weather {}</h1><a href=\"/x1\">x</a>", marker(5))));
    r.insert(
        "/band-form".into(),
        html(
            "Portal",
            &format!("<p>Account portal {}</p><form action=\"/step2\" method=\"post\"><input type=\"email\" name=\"e\"></form>", marker(41)),
        ),
    );
    r.insert(
        "/step2".into(),
        html("Verify", &format!("<h1>Verify your account {}</h1><form action=\"/c\"><input type=\"password\" name=\"p\"></form>", marker(98))),
    );
    let links: String = (1..=7).map(|i| format!("<a href=\"/child{i}\">link {i}</a>")).collect();
    r.insert("/band-links".into(), html("Hub", &format!("<p>hub {}</p>{links}", marker(35))));
    r.insert("/band-hit".into(), html("Hub", &format!("<p>hub {}</p>{links}", marker(44)).replace("/child3", "/evil")));
    for i in 1..=7 {
        r.insert(format!("/child{i}"), html("Child", &format!("<p>child {} <a href=\"/deep\">deeper</a></p>", marker(10))));
    }
    r.insert("/evil".into(), html("Login", &format!("<p>PayPal sign in {}</p>", marker(93))));
    r.insert("/phish".into(), html("PayPal login", &format!("<p>Urgent {}</p><form action=\"#\"><input type=\"password\" name=\"p\"></form>", marker(96))));
    r.insert("/redirect-loop".into(), MockResponse::Redirect("/redirect-loop".into()));
    r.insert("/huge".into(), MockResponse::Large(6 * 1024 * 1024));
    r.insert("/slow".into(), MockResponse::Delayed(Duration::from_secs(5), "<p>late</p>".into()));
    r.insert("/gen".into(), MockResponse::Status(500));
    r
}

#[tokio::test]
async fn confident_benign_has_no_follow_up() {
    let web = MockWeb::start(site()).await.unwrap();
    let s = scanner_with(&config(), Arc::new(MarkerScorer::default()));
    let r = s.scan_url(&web.url("/benign")).await.unwrap();
    assert_eq!(r.status, ScanStatus::Completed);
    assert_eq!(r.label, Some(Label::Benign));
    assert!(r.followed_links.is_empty());
    assert!(r.warning.is_none());
    assert_eq!(r.ip.as_deref(), Some("127.0.0.1"));
    assert_eq!(web.hits("/x1"), 0);
}

#[tokio::test]
async fn form_follow_through_flags_the_second_page() {
    let web = MockWeb::start(site()).await.unwrap();
    let s = scanner_with(&config(), Arc::new(MarkerScorer::default()));
    let r = s.scan_url(&web.url("/band-form")).await.unwrap();
    assert!((r.verdict.as_ref().unwrap().confidence - 0.41).abs() < 1e-9);
    assert_eq!(r.label, Some(Label::Phishing));
    assert!((r.confidence.unwrap() - 0.98).abs() < 1e-9);
    let p = r.provenance.as_ref().unwrap();
    assert_eq!(p.via, FollowVia::Form);
    assert_eq!(p.url, web.url("/step2"));
    assert_eq!(r.followed_links.len(), 1);
    assert_eq!(web.hits("/step2"), 1);
    assert_eq!(web.hits("/c"), 0, "follow-through is depth 1");
    let w = r.warning.as_ref().expect("phishing record carries a warning");
    assert!(!w.features.is_empty());
    r.check(5).unwrap();
}

#[tokio::test]
async fn link_follow_up_visits_at_most_five_children_at_depth_one() {
    let web = MockWeb::start(site()).await.unwrap();
    let s = scanner_with(&config(), Arc::new(MarkerScorer::default()));
    let r = s.scan_url(&web.url("/band-links")).await.unwrap();
    assert_eq!(r.label, Some(Label::Benign));
    let links: Vec<_> = r.followed_links.iter().filter(|f| f.via == FollowVia::Link).collect();
    assert_eq!(links.len(), 5);
    assert_eq!(links[0].url, web.url("/child1"));
    assert_eq!(web.hits("/child6"), 0);
    assert_eq!(web.hits("/deep"), 0);
    r.check(5).unwrap();
}

#[tokio::test]
async fn phishing_child_marks_the_record() {
    let web = MockWeb::start(site()).await.unwrap();
    let s = scanner_with(&config(), Arc::new(MarkerScorer::default()));
    let r = s.scan_url(&web.url("/band-hit")).await.unwrap();
    assert_eq!(r.label, Some(Label::Phishing));
    let p = r.provenance.unwrap();
    assert_eq!((p.via, p.url.as_str()), (FollowVia::Link, web.url("/evil").as_str()));
    assert_eq!(r.followed_links.len(), 3, "stops at the first phishing child");
    assert!(r.warning.is_some());
}

#[tokio::test]
async fn network_failures_are_fetch_failed() {
    let web = MockWeb::start(site()).await.unwrap();
    let s = scanner_with(&config(), Arc::new(MarkerScorer::default()));
    let closed = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    for url in [format!("http://{closed}/"), web.url("/redirect-loop"), web.url("/huge"), web.url("/slow"), web.url("/missing")] {
        let r = s.scan_url(&url).await.unwrap();
        assert_eq!(r.status, ScanStatus::FetchFailed, "{url}: {:?}", r.error);
        assert!(r.label.is_none() && r.verdict.is_none());
    }
}

#[tokio::test]
async fn scorer_outage_is_inconclusive_and_not_cached() {
    let web = MockWeb::start(site()).await.unwrap();
    let s = scanner_with(&config(), Arc::new(DownScorer));
    let r = s.scan_url(&web.url("/phish")).await.unwrap();
    assert_eq!(r.status, ScanStatus::Inconclusive);
    assert!(s.cached(&r.url).is_none());
}

#[tokio::test]
async fn cache_hits_make_no_scorer_queries() {
    let web = MockWeb::start(site()).await.unwrap();
    let scorer = Arc::new(CountingScorer::new(MarkerScorer::default()));
    let s = scanner_with(&config(), scorer.clone());
    let first = s.scan_url(&web.url("/phish")).await.unwrap();
    assert!(first.is_phishing());
    let calls = scorer.calls();
    let fetches = web.total_hits();
    let again = s.scan_url(&web.url("/phish")).await.unwrap();
    assert_eq!(again, first);
    assert_eq!(scorer.calls(), calls);
    assert_eq!(web.total_hits(), fetches);
    assert_eq!(s.stats().cache_hits, 1);
}

#[tokio::test]
async fn expired_benign_records_are_rescanned() {
    let web = MockWeb::start(site()).await.unwrap();
    let mut c = config();
    c.service.benign_ttl_hours = 0;
    let s = scanner_with(&c, Arc::new(MarkerScorer::default()));
    s.scan_url(&web.url("/benign")).await.unwrap();
    s.scan_url(&web.url("/benign")).await.unwrap();
    assert_eq!(web.hits("/benign"), 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn a_url_is_never_scanned_concurrently_with_itself() {
    let web = MockWeb::start(site()).await.unwrap();
    let s = Arc::new(scanner_with(&config(), Arc::new(MarkerScorer::default())));
    let url = web.url("/phish");
    let tasks: Vec<_> = (0..12)
        .map(|_| {
            let (s, url) = (s.clone(), url.clone());
            tokio::spawn(async move { s.scan_url(&url).await.unwrap() })
        })
        .collect();
    let mut records = Vec::new();
    for t in tasks {
        records.push(t.await.unwrap());
    }
    assert!(records.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(web.hits("/phish"), 1);
    assert_eq!(s.stats().scans, 1);
    assert_eq!(s.stats().cache_hits, 11);
}

#[tokio::test]
async fn phishing_records_are_reported_to_every_sink() {
    let web = MockWeb::start(site()).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut c = config();
    c.service.sinks = vec![
        SinkConfig { name: "a".into(), dir: dir.path().join("a") },
        SinkConfig { name: "b".into(), dir: dir.path().join("b") },
    ];
    let s = scanner_with(&c, Arc::new(MarkerScorer::default()));
    s.scan_url(&web.url("/phish")).await.unwrap();
    s.scan_url(&web.url("/benign")).await.unwrap();
    for sub in ["a", "b"] {
        let files: Vec<_> = std::fs::read_dir(dir.path().join(sub)).unwrap().collect();
        assert_eq!(files.len(), 1);
        let text = std::fs::read_to_string(files[0].as_ref().unwrap().path()).unwrap();
        let payload = ReportPayload::parse(&text).unwrap();
        assert_eq!(payload.url, web.url("/phish"));
        assert!(payload.parsed_text.lines().any(|l| l.starts_with("form:")));
    }
}

#[tokio::test]
async fn failing_generator_falls_back_to_template() {
    let web = MockWeb::start(site()).await.unwrap();
    let generator = HttpGenerator::new(web.url("/gen"), "m", None, Duration::from_secs(2), 1);
    let s = scanner_with(&config(), Arc::new(MarkerScorer::default())).with_generator(Arc::new(generator));
    let r = s.scan_url(&web.url("/phish")).await.unwrap();
    let w = r.warning.unwrap();
    assert_eq!(w.generator, GeneratorKind::Template);
    assert!(w.fallback_reason.unwrap().contains("500"));
}

#[tokio::test]
async fn records_persist_across_restarts() {
    let web = MockWeb::start(site()).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bl.jsonl");
    let first = {
        let store = Arc::new(BlocklistStore::open(&path).unwrap());
        let s = Scanner::new(&config(), Arc::new(MarkerScorer::default()), store).unwrap();
        s.scan_url(&web.url("/phish")).await.unwrap()
    };
    let store = Arc::new(BlocklistStore::open(&path).unwrap());
    assert_eq!(store.get(&first.url), Some(first));
}
