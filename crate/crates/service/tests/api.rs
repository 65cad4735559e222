use std::collections::HashMap;
use std::sync::Arc;

use phishscan_core::Config;
use phishscan_service::mock::{marker, MarkerScorer, MockResponse, MockWeb};
use phishscan_service::{router, BlocklistStore, RecordPage, ScanRecord, Scanner, SCHEMA_VERSION};
use serde_json::{json, Value};

async fn start_api(scanner: Arc<Scanner>) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(scanner)).await.unwrap() });
    format!("http://{addr}")
}

fn scanner() -> Arc<Scanner> {
    let mut c = Config::default();
    c.service.fetch_rate_per_sec = 0.0;
    c.explainer.importance.samples = 60;
    Arc::new(Scanner::new(&c, Arc::new(MarkerScorer::default()), Arc::new(BlocklistStore::in_memory())).unwrap())
}

#[tokio::test]
async fn scan_then_fetch_record_and_list() {
    let mut routes = HashMap::new();
    for i in 0..150 {
        let score = if i % 3 == 0 { 95 } else { 5 };
        routes.insert(
            format!("/p{i}"),
            MockResponse::Html(format!("<title>t</title><p>page {i} {}</p><form action=\"#\"><input type=\"password\" name=\"p\"></form>", marker(score))),
        );
    }
    let web = MockWeb::start(routes).await.unwrap();
    let api = start_api(scanner()).await;
    let http = reqwest::Client::new();

    let r: ScanRecord = http.post(format!("{api}/scan")).json(&json!({"url": web.url("/p0")})).send().await.unwrap().json().await.unwrap();
    assert_eq!(r.schema_version, SCHEMA_VERSION);
    assert!(r.is_phishing());
    let w = r.warning.as_ref().unwrap();
    assert!(w.features.iter().all(|f| !f.name.is_empty() && !f.location.is_empty() && !f.description.is_empty()));

    let by_path: ScanRecord =
        http.get(format!("{api}/record/{}", web.url("/p0"))).send().await.unwrap().json().await.unwrap();
    assert_eq!(by_path, r);
    let by_query: ScanRecord =
        http.get(url::Url::parse_with_params(&format!("{api}/record"), [("url", web.url("/p0"))]).unwrap()).send().await.unwrap().json().await.unwrap();
    assert_eq!(by_query, r);

    for i in 1..150 {
        let body = json!({"url": web.url(&format!("/p{i}")), "source": if i == 1 { Some("qr") } else { None }});
        let status = http.post(format!("{api}/scan")).json(&body).send().await.unwrap().status();
        assert!(status.is_success());
    }
    let p1: RecordPage = http.get(format!("{api}/records?page=1&page_size=100")).send().await.unwrap().json().await.unwrap();
    let p2: RecordPage = http.get(format!("{api}/records?page=2&page_size=100")).send().await.unwrap().json().await.unwrap();
    assert_eq!((p1.total, p1.pages, p1.records.len(), p2.records.len()), (150, 2, 100, 50));
    let phish: RecordPage = http.get(format!("{api}/records?label=phishing")).send().await.unwrap().json().await.unwrap();
    assert_eq!(phish.total, 50);
    let cat: RecordPage = http.get(format!("{api}/records?category=Regular")).send().await.unwrap().json().await.unwrap();
    assert!(cat.records.iter().all(|r| r.evasion == Some(phishscan_core::EvasionCategory::Regular)));

    let health: Value = http.get(format!("{api}/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["records"], 150);
    assert_eq!(health["model_version"], "marker-stub");
}

#[tokio::test]
async fn errors_are_structured() {
    let api = start_api(scanner()).await;
    let http = reqwest::Client::new();
    let resp = http.post(format!("{api}/scan")).json(&json!({"url": "not a url"})).send().await.unwrap();
    assert_eq!(resp.status(), 400);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["schema_version"], SCHEMA_VERSION);
    assert!(body["error"].as_str().unwrap().contains("invalid url"));

    let resp = http.get(format!("{api}/record/http://nowhere.test/")).send().await.unwrap();
    assert_eq!(resp.status(), 404);
    let resp = http.get(format!("{api}/records?page_size=0")).send().await.unwrap();
    assert_eq!(resp.status(), 400);
}

#[test]
fn contract_file_covers_the_record_schema() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/api-contract.json");
    let contract: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(contract["schema_version"], SCHEMA_VERSION);
    let fields = contract["definitions"]["ScanRecord"]["required"].as_array().unwrap();
    let mut r = ScanRecord::failed("http://a.test/", phishscan_service::ScanStatus::FetchFailed, "x".into(), "m".into());
    r.ip = Some("127.0.0.1".into());
    let v = serde_json::to_value(&r).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let mut required: Vec<&str> = fields.iter().map(|f| f.as_str().unwrap()).collect();
    required.sort();
    let mut keys = keys;
    keys.sort();
    assert_eq!(required, keys);
}
