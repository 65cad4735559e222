//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Every check compares against an oracle computed here, not by
//! the code under test.

use std::collections::{BTreeSet, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use base64::Engine;
use phishscan_core::adversarial::{augment_corpus, retraining_set, OptimizerConfig, RoundClass, DEFAULT_ADVERSARIAL_WEIGHT};
use phishscan_core::corpus::{desk_corpus, generate, mixed_corpus, PageStyle};
use phishscan_core::detector::metrics::{cross_validate, evaluate, median, train_on_pages};
use phishscan_core::detector::{classify_document, CountingScorer, DecidedBy, FnScorer};
use phishscan_core::explainer::{explain, Codebook, ImportanceConfig};
use phishscan_core::window::{make_windows, split_train_test, Token};
use phishscan_core::{
    apply_manipulation, normalize_encodings, optimize, parse_document, render_parsed_text, Chunk, Config, HidingStrategy,
    Label, LabeledPage, Manipulation, ManipulationId, ManipulationParams, PatchConfig, PipelineConfig, ReferenceModel,
    TrainConfig, WindowConfig,
};
use phishscan_service::mock::{marker, MarkerScorer, MockResponse, MockWeb};
use phishscan_service::{replay, BlocklistStore, FollowVia, ScanRecord, ScanStatus, Scanner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 patch nullification", c1_patch_nullification),
        ("2 optimizer accounting", c2_optimizer_accounting),
        ("3 window laws", c3_window_laws),
        ("4 aggregation oracle", c4_aggregation),
        ("5 reference scorer quality", c5_scorer_quality),
        ("6 adversarial retraining", c6_retraining),
        ("7 explainer faithfulness", c7_explainer),
        ("8 replay determinism", c8_replay),
        ("9 encoding normalization", c9_encoding),
    ];
    let only: Option<String> = std::env::var("ACCEPTANCE_ONLY").ok();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        if only.as_deref().is_some_and(|o| !name.starts_with(o)) {
            continue;
        }
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {name}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn train(pages: &[LabeledPage]) -> ReferenceModel {
    train_on_pages(pages, &PipelineConfig::default(), &TrainConfig::default()).expect("training")
}

// 1 --------------------------------------------------------------------------

fn c1_patch_nullification() -> Outcome {
    use ManipulationId::*;
    let started = Instant::now();
    let corpus = desk_corpus(1);
    ensure!(corpus.len() == 100, "desk corpus has {} documents", corpus.len());
    let pipeline = PipelineConfig::with_patches(PatchConfig::all_on());
    let model = train(&mixed_corpus(60, 60, 2));
    let ids = [A1, A2, A3, A4, A5, A6, A9, A10, A11, A15];
    let strategies = [HidingStrategy::S1, HidingStrategy::S2, HidingStrategy::S3, HidingStrategy::S4];
    let mut applied: HashMap<ManipulationId, usize> = HashMap::new();
    let mut checked = 0;
    for page in &corpus {
        let original = render_parsed_text(&parse_document(&page.html, &page.url, &pipeline.patches));
        let c_o = pipeline.confidence(&model, &page.html, &page.url).map_err(|e| e.to_string())?;
        for id in ids {
            for strategy in strategies {
                let m = Manipulation::with_params(id, ManipulationParams { strategy, ..Default::default() });
                let out = apply_manipulation(&page.html, &page.url, &m);
                if out.applied {
                    *applied.entry(id).or_default() += 1;
                }
                let patched = render_parsed_text(&parse_document(&out.html, &page.url, &pipeline.patches));
                ensure!(patched == original, "{} {id} {strategy:?}: parsed representation differs", page.id);
                let c_p = pipeline.confidence(&model, &out.html, &page.url).map_err(|e| e.to_string())?;
                ensure!(c_o - c_p == 0.0, "{} {id} {strategy:?}: advantage {}", page.id, c_o - c_p);
                checked += 1;
            }
        }
    }
    for id in ids {
        ensure!(applied.get(&id).copied().unwrap_or(0) > 0, "{id} never modified a page; the check would be vacuous");
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1}s, limit 30s");
    let total_applied: usize = applied.values().sum();
    Ok(format!("{checked} variants ({total_applied} modified pages), 0 mismatches, advantage 0"))
}

// 2 --------------------------------------------------------------------------

fn c2_optimizer_accounting() -> Outcome {
    let model = train(&mixed_corpus(120, 120, 21));
    let pipeline = PipelineConfig::default();
    let config = OptimizerConfig::default();
    ensure!(config.budget == 35, "default budget {}", config.budget);
    ensure!(config.sr_set.iter().all(|m| m.round_class() == RoundClass::SR), "SR set holds a multi-round manipulation");
    ensure!(config.mr_set.iter().all(|m| m.round_class() == RoundClass::MR), "MR set holds a single-round manipulation");
    let expected_rounds = (35 - config.sr_set.len()) / config.mr_set.len();
    ensure!(expected_rounds == 5, "partition gives {expected_rounds} rounds");

    let targets: Vec<LabeledPage> = mixed_corpus(160, 0, 22)
        .into_iter()
        .filter(|p| pipeline.confidence(&model, &p.html, &p.url).is_ok_and(|c| c >= 0.5))
        .take(100)
        .collect();
    ensure!(targets.len() == 100, "only {} phishing pages classified phishing", targets.len());
    let mut max_queries = 0;
    for page in &targets {
        let scorer = CountingScorer::new(&model);
        let mut calls = 0usize;
        let run = optimize(
            &page.id,
            &page.html,
            &page.url,
            |h: &str| {
                calls += 1;
                pipeline.confidence(&scorer, h, &page.url)
            },
            &config,
        )
        .map_err(|e| format!("{}: {e}", page.id))?;
        ensure!(calls == run.queries_used + run.baseline_queries, "{}: {calls} calls vs {} reported", page.id, run.queries_used);
        ensure!(run.queries_used <= 35, "{}: {} queries", page.id, run.queries_used);
        ensure!(run.rounds == expected_rounds, "{}: {} rounds", page.id, run.rounds);
        let mr_rounds: BTreeSet<usize> = run.stages.iter().filter_map(|s| s.round).collect();
        ensure!(mr_rounds.len() == expected_rounds, "{}: {} MR rounds in the trace", page.id, mr_rounds.len());
        let mut best = run.original_score;
        for s in &run.stages {
            ensure!(s.best_after <= best, "{} stage {}: best rose {best} -> {}", page.id, s.stage, s.best_after);
            best = s.best_after;
        }
        ensure!(best == run.best_score, "{}: final best {best} vs reported {}", page.id, run.best_score);
        max_queries = max_queries.max(run.queries_used);
    }
    Ok(format!("100 runs, max {max_queries} queries, R={expected_rounds}, best non-increasing"))
}

// 3 --------------------------------------------------------------------------

/// Nominal windows by direct enumeration: slide from 0 until one reaches T.
fn enumerate_windows(total: usize, window: usize, stride: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        out.push((start, (start + window).min(total)));
        if start + window >= total {
            return out;
        }
        start += stride;
    }
}

fn c3_window_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut snap_free = 0;
    for case in 0..1000 {
        let window: usize = rng.gen_range(1..=600);
        let stride = rng.gen_range(1..=window);
        let total: usize = rng.gen_range(1..=3000);
        // boundary modes: one token per element, lengths dividing both W and S, arbitrary lengths
        let mode = case % 3;
        let g = if mode == 1 { gcd(window, stride) } else { 1 };
        let total = if mode == 1 { total.div_ceil(g) * g } else { total };
        let mut tokens = Vec::with_capacity(total);
        let mut element = 0;
        while tokens.len() < total {
            let len = match mode {
                0 => 1,
                1 => g,
                _ => rng.gen_range(1..=window.min(40)),
            }
            .min(total - tokens.len());
            for _ in 0..len {
                tokens.push(Token { text: format!("t{}", tokens.len()), element });
            }
            element += 1;
        }
        let config = WindowConfig { window, stride, merge_enabled: true };
        let chunks = make_windows(&tokens, &config).map_err(|e| format!("case {case}: {e}"))?;
        let starts: BTreeSet<usize> =
            (0..tokens.len()).filter(|&i| i == 0 || tokens[i].element != tokens[i - 1].element).collect();
        let mut covered = vec![false; total];
        for c in &chunks {
            ensure!(c.len() <= window, "case {case}: chunk of {} tokens > W={window}", c.len());
            ensure!(c.len() > 0, "case {case}: empty chunk");
            ensure!(starts.contains(&c.token_span.0), "case {case}: chunk starts mid-element");
            ensure!(c.token_span.1 == total || starts.contains(&c.token_span.1), "case {case}: chunk ends mid-element");
            for i in c.token_span.0..c.token_span.1 {
                covered[i] = true;
            }
        }
        ensure!(covered.iter().all(|c| *c), "case {case}: tokens left uncovered");
        let elements_seen: BTreeSet<usize> = chunks.iter().flat_map(|c| c.token_elements.iter().copied()).collect();
        ensure!(elements_seen.len() == element, "case {case}: {} of {element} elements covered", elements_seen.len());
        if mode < 2 {
            snap_free += 1;
            let expected = enumerate_windows(total, window, stride);
            let got: Vec<(usize, usize)> = chunks.iter().map(|c| c.token_span).collect();
            ensure!(got == expected, "case {case} (T={total} W={window} S={stride}): {} windows vs {} enumerated", got.len(), expected.len());
            ensure!(config.nominal_count(total) == expected.len(), "case {case}: count formula disagrees with enumeration");
        }
    }
    Ok(format!("1000 configurations, {snap_free} snap-free matched the enumerator exactly"))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// 4 --------------------------------------------------------------------------

fn c4_aggregation() -> Outcome {
    // each button renders as `button : wordN`, three tokens, so W=S=3 gives one chunk per element
    let window = WindowConfig { window: 3, stride: 3, merge_enabled: false };
    let hot = |c: &Chunk| c.tokens.iter().any(|t| t.starts_with("hot"));
    let warm = |c: &Chunk| c.tokens.iter().filter(|t| t.starts_with("warm")).count();
    let phase1 = FnScorer(move |c: &Chunk| if hot(c) { 0.9 } else { 0.1 });
    let additive = FnScorer(move |c: &Chunk| if hot(c) { 0.9 } else { (0.16 * warm(c) as f64).min(0.99) });
    let faint = FnScorer(move |c: &Chunk| 0.3 * c.tokens.iter().filter(|t| t.starts_with("hot")).count() as f64);
    let mut merge_verdicts = 0;
    for mask in 0u32..256 {
        let html: String = (0..8)
            .map(|i| format!("<button>{}{i}</button>", if mask >> i & 1 == 1 { "hot" } else { "warm" }))
            .collect();
        let doc = parse_document(&html, "http://a.test/", &PatchConfig::default());
        let oracle = mask != 0;
        let v = classify_document(&phase1, &doc, &window, 0.5).map_err(|e| e.to_string())?;
        ensure!(v.chunk_trace.len() == 8, "mask {mask:08b}: {} chunks", v.chunk_trace.len());
        ensure!(v.label.is_phishing() == oracle, "mask {mask:08b}: phase-1 {:?} vs OR {oracle}", v.label);

        let merging = WindowConfig { merge_enabled: true, ..window };
        for scorer in [&phase1 as &dyn phishscan_core::Scorer, &additive] {
            let v = classify_document(scorer, &doc, &merging, 0.5).map_err(|e| e.to_string())?;
            let any_chunk = v.chunk_trace.iter().any(|c| c.confidence >= 0.5);
            if v.decided_by == DecidedBy::Merge {
                merge_verdicts += 1;
                ensure!(!any_chunk, "mask {mask:08b}: merge verdict with a phishing chunk");
                ensure!(v.is_phishing(), "mask {mask:08b}: merge decision without phishing label");
            }
            ensure!(v.is_phishing() == (any_chunk || v.merge_trace.iter().any(|(_, p)| *p >= 0.5)), "mask {mask:08b}: label disagrees with traces");
            if any_chunk {
                ensure!(v.decided_by == DecidedBy::Chunk && v.merge_trace.is_empty(), "mask {mask:08b}: merged despite a phishing chunk");
            }
        }

        // every chunk is below threshold; the first prefix holding two hot elements decides
        let v = classify_document(&faint, &doc, &merging, 0.5).map_err(|e| e.to_string())?;
        let second_hot = (0..8).filter(|i| mask >> i & 1 == 1).nth(1);
        match second_hot {
            Some(i) => {
                let k = (i + 1).max(2);
                ensure!(v.decided_by == DecidedBy::Merge && v.is_phishing(), "mask {mask:08b}: expected merge verdict");
                ensure!(v.merge_trace.last().map(|m| m.0) == Some(k), "mask {mask:08b}: decided at {:?}, expected prefix {k}", v.merge_trace.last());
                merge_verdicts += 1;
            }
            None => ensure!(!v.is_phishing() && v.merge_trace.len() == 7, "mask {mask:08b}: faint scorer flagged or stopped early"),
        }
    }
    ensure!(merge_verdicts > 0, "no merge verdicts exercised");
    Ok(format!("256/256 masks match OR; {merge_verdicts} merge verdicts, all with sub-threshold chunks"))
}

// 5 --------------------------------------------------------------------------

fn c5_scorer_quality() -> Outcome {
    let corpus = generate(200, 200, PageStyle::Saved, 5);
    let (train_set, held_out) = split_train_test(&corpus, 0.7, 5);
    let pipeline = PipelineConfig::default();
    let tcfg = TrainConfig { folds: 5, ..TrainConfig::default() };
    let cv = cross_validate(&train_set, &pipeline, &tcfg).map_err(|e| e.to_string())?;
    let model = train_on_pages(&train_set, &pipeline, &tcfg).map_err(|e| e.to_string())?;
    let m = evaluate(&model, &held_out, &pipeline).map_err(|e| e.to_string())?;
    // independent latency measurement around the full decode-parse-window-score path
    let mut latencies: Vec<f64> = held_out
        .iter()
        .map(|p| {
            let t = Instant::now();
            let _ = pipeline.classify(&model, p.html.as_bytes(), &p.url);
            t.elapsed().as_secs_f64() * 1000.0
        })
        .collect();
    let latency = median(&mut latencies);
    // F1 recomputed from raw predictions
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for p in &held_out {
        let predicted = pipeline.classify(&model, p.html.as_bytes(), &p.url).map_err(|e| e.to_string())?.1.label;
        match (p.label, predicted) {
            (Label::Phishing, Label::Phishing) => tp += 1.0,
            (Label::Benign, Label::Phishing) => fp += 1.0,
            (Label::Phishing, Label::Benign) => fn_ += 1.0,
            _ => {}
        }
    }
    let f1 = 2.0 * tp / (2.0 * tp + fp + fn_);
    ensure!((f1 - m.f1).abs() < 1e-12, "reported F1 {} vs recomputed {f1}", m.f1);
    ensure!(cv.mean_f1 >= 0.85, "5-fold CV mean F1 {:.3}", cv.mean_f1);
    ensure!(f1 >= 0.85, "held-out F1 {f1:.3}");
    ensure!(latency < 1000.0, "median latency {latency:.1} ms");
    Ok(format!("CV mean F1 {:.3}, held-out F1 {f1:.3} on {} pages, median latency {latency:.2} ms", cv.mean_f1, held_out.len()))
}

// 6 --------------------------------------------------------------------------

fn mean_advantage(model: &ReferenceModel, pages: &[LabeledPage], target: ManipulationId) -> (f64, usize) {
    let pipeline = PipelineConfig::default();
    let mut total = 0.0;
    let mut n = 0;
    for p in pages.iter().filter(|p| p.label == Label::Phishing) {
        let out = apply_manipulation(&p.html, &p.url, &Manipulation::new(target));
        if !out.applied {
            continue;
        }
        let c_o = pipeline.confidence(model, &p.html, &p.url).expect("score");
        let c_p = pipeline.confidence(model, &out.html, &p.url).expect("score");
        total += c_o - c_p;
        n += 1;
    }
    (if n == 0 { 0.0 } else { total / n as f64 }, n)
}

fn c6_retraining() -> Outcome {
    let corpus = mixed_corpus(300, 300, 5);
    let (train_set, held_out) = split_train_test(&corpus, 0.7, 11);
    let pipeline = PipelineConfig::default();
    let model = train(&train_set);
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for target in [ManipulationId::A8, ManipulationId::A12, ManipulationId::A13] {
        let (before, n) = mean_advantage(&model, &held_out, target);
        ensure!(n > 0 && before > 0.0, "{target}: no positive advantage to reduce (n={n}, {before})");
        let aug = augment_corpus(&train_set, target, |h: &str, u: &str| pipeline.confidence(&model, h, u), &OptimizerConfig::default())
            .map_err(|e| format!("{target}: {e}"))?;
        let retrained = train(&retraining_set(&train_set, &aug.pages, DEFAULT_ADVERSARIAL_WEIGHT));
        let (after, _) = mean_advantage(&retrained, &held_out, target);
        let reduction = 1.0 - after / before;
        let line = format!("{target} {before:.4}->{after:.4} (-{:.0}%, {} adv pages)", reduction * 100.0, aug.pages.len());
        if reduction < 0.5 {
            failures.push(line.clone());
        }
        lines.push(line);
    }
    ensure!(failures.is_empty(), "reduction below 50%: {}", failures.join("; "));
    Ok(lines.join(", "))
}

// 7 --------------------------------------------------------------------------

fn c7_explainer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pipeline = PipelineConfig::default();
    let icfg = ImportanceConfig { samples: 300, ..ImportanceConfig::default() };
    let codebook = Codebook::default();
    let mut hits = 0;
    for case in 0..50 {
        let n = rng.gen_range(8..=16);
        let html: String = (0..n).map(|i| format!("<button>item{i}</button>")).collect();
        let doc = parse_document(&html, "http://stub.test/", &pipeline.patches);
        ensure!(doc.elements.len() == n, "case {case}: {} elements parsed", doc.elements.len());
        let first = rng.gen_range(0..n);
        let deps: Vec<usize> = match case % 3 {
            0 => vec![first],
            _ => {
                let mut second = rng.gen_range(0..n);
                while second == first {
                    second = rng.gen_range(0..n);
                }
                vec![first, second]
            }
        };
        let conjunctive = case % 3 == 2;
        let words: Vec<String> = deps.iter().map(|d| format!("item{d}")).collect();
        let scorer = FnScorer(move |c: &Chunk| {
            let present = words.iter().filter(|w| c.tokens.contains(w)).count();
            if conjunctive {
                if present == words.len() { 0.95 } else { 0.05 }
            } else {
                0.05 + 0.9 * present as f64 / words.len() as f64
            }
        });
        let e = explain(&doc, "http://stub.test/", &scorer, &pipeline, &icfg, &codebook, None).map_err(|e| format!("case {case}: {e}"))?;
        let again = explain(&doc, "http://stub.test/", &scorer, &pipeline, &icfg, &codebook, None).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(e == again, "case {case}: explanation not deterministic");
        let top: BTreeSet<usize> = e.importance.top(icfg.top_k).iter().map(|t| t.order_index).collect();
        if deps.iter().all(|d| top.contains(d)) {
            hits += 1;
        }
    }
    let rate = hits as f64 / 50.0;
    ensure!(rate >= 0.95, "top-{} hit rate {:.0}%", icfg.top_k, rate * 100.0);
    Ok(format!("top-3 contains the dependency set in {hits}/50 cases; repeated runs identical"))
}

// 8 --------------------------------------------------------------------------

const CHILD_LINKS: usize = 8;

fn c8_replay() -> Outcome {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?.block_on(c8_async())
}

fn page_score(i: usize) -> u32 {
    match i % 10 {
        0 | 1 => 95,
        2 => 35,
        3 => 44,
        4 => 41,
        5 => 30,
        6 => 50,
        7 => 29,
        _ => 5,
    }
}

async fn c8_async() -> Outcome {
    let mut routes = HashMap::new();
    for j in 0..CHILD_LINKS {
        routes.insert(format!("/c{j}"), MockResponse::Html(format!("<p>child {j} {}</p>", marker(10))));
    }
    routes.insert("/evil".into(), MockResponse::Html(format!("<p>sign in {}</p>", marker(92))));
    routes.insert("/step".into(), MockResponse::Html(format!("<p>verify {}</p>", marker(97))));
    for i in 0..1000 {
        let mut links: Vec<String> = (0..CHILD_LINKS).map(|j| format!("/c{j}")).collect();
        if i % 20 == 3 {
            links[2] = "/evil".into();
        }
        let anchors: String = links.iter().map(|l| format!("<a href=\"{l}\">more</a>")).collect();
        let form = if i % 10 == 4 { "<form action=\"/step\" method=\"post\"><input type=\"email\" name=\"e\"></form>" } else { "" };
        routes.insert(
            format!("/p{i}"),
            MockResponse::Html(format!("<title>p{i}</title><p>page {i} {}</p>{anchors}{form}", marker(page_score(i)))),
        );
    }
    let web = MockWeb::start(routes).await.map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("replay.txt");
    let lines: Vec<String> = (0..1000).map(|i| web.url(&format!("/p{i}"))).collect();
    std::fs::write(&path, lines.join("\n")).map_err(|e| e.to_string())?;

    let mut config = Config::default();
    config.service.fetch_rate_per_sec = 0.0;
    config.service.fetch_workers = 16;
    config.explainer.importance.samples = 40;
    let (low, high) = config.service.follow_band;
    let run = || async {
        let scanner = Scanner::new(&config, Arc::new(MarkerScorer::default()), Arc::new(BlocklistStore::in_memory())).expect("scanner");
        replay(Arc::new(scanner), &path, None).await.expect("replay")
    };
    let a = run().await;
    let b = run().await;
    ensure!(a.records.len() == 1000, "{} records", a.records.len());
    let strip = |rs: &[ScanRecord]| rs.iter().map(ScanRecord::without_timestamp).collect::<Vec<_>>();
    ensure!(strip(&a.records) == strip(&b.records), "record sets differ between runs");

    let mut followed_pages = 0;
    for r in &a.records {
        ensure!(r.status == ScanStatus::Completed, "{}: {:?} {:?}", r.url, r.status, r.error);
        let page = r.verdict.as_ref().ok_or_else(|| format!("{}: no verdict", r.url))?;
        let links: Vec<_> = r.followed_links.iter().filter(|f| f.via == FollowVia::Link).collect();
        let in_band = !page.is_phishing() && page.confidence >= low && page.confidence < high;
        ensure!(links.len() <= 5, "{}: {} children", r.url, links.len());
        ensure!(in_band || links.is_empty(), "{}: follow-up at confidence {}", r.url, page.confidence);
        let i: usize = r.url.rsplit("/p").next().and_then(|s| s.parse().ok()).ok_or("bad url")?;
        if in_band {
            followed_pages += 1;
            let expected = if i % 20 == 3 { 3 } else { 5 };
            ensure!(links.len() == expected, "{}: {} children, expected {expected}", r.url, links.len());
            let first: Vec<String> = (0..expected).map(|j| web.url(&format!("/c{j}"))).collect();
            ensure!(
                links.iter().zip(&first).all(|(f, u)| &f.url == u || f.url.ends_with("/evil")),
                "{}: children out of document order",
                r.url
            );
        }
    }
    for j in 5..CHILD_LINKS {
        ensure!(web.hits(&format!("/c{j}")) == 0, "link {j} beyond the first five was fetched");
    }
    Ok(format!("1000 urls x2 identical modulo timestamps; {followed_pages} in-band pages followed <=5 children each"))
}

// 9 --------------------------------------------------------------------------

fn b64(s: &str) -> String {
    base64::engine::general_purpose::STANDARD.encode(s.as_bytes())
}

fn percent(s: &str) -> String {
    s.bytes().map(|b| format!("%{b:02X}")).collect()
}

fn legacy(enc: &'static encoding_rs::Encoding, s: &str) -> Vec<u8> {
    let (bytes, _, unmappable) = enc.encode(s);
    assert!(!unmappable, "fixture text not representable in {}", enc.name());
    bytes.into_owned()
}

fn utf16(s: &str, big_endian: bool) -> Vec<u8> {
    let mut out = if big_endian { vec![0xFE, 0xFF] } else { vec![0xFF, 0xFE] };
    for u in s.encode_utf16() {
        out.extend_from_slice(&if big_endian { u.to_be_bytes() } else { u.to_le_bytes() });
    }
    out
}

fn encoding_fixtures() -> Vec<(&'static str, Vec<u8>, String)> {
    use encoding_rs::{KOI8_R, SHIFT_JIS, WINDOWS_1252};
    let wrap = |body: String| format!("<script>{body}</script>").into_bytes();
    let nested2 = format!("eval(atob(\"{}\"))", b64("document.title='x'"));
    let nested3 = format!("eval(atob('{}'))", b64(&nested2));
    vec![
        ("ascii identity", b"<html><body><h1>Hello</h1></body></html>".to_vec(), "<html><body><h1>Hello</h1></body></html>".into()),
        ("eval atob", wrap(format!("eval(atob(\"{}\"))", b64("alert(1)"))), "<script>alert(1)</script>".into()),
        (
            "window.eval, single quotes, padding",
            wrap(format!("  window.eval(atob('{}'));  ", b64("location.href='https://x.test/'"))),
            "<script>location.href='https://x.test/'</script>".into(),
        ),
        ("Function constructor", wrap(format!("new Function(atob(\"{}\"))()", b64("var a=1;"))), "<script>var a=1;</script>".into()),
        ("unescape", wrap(format!("Function(unescape('{}'))()", percent("alert(2)"))), "<script>alert(2)</script>".into()),
        ("nested twice", wrap(nested3.clone()), "<script>document.title='x'</script>".into()),
        (
            "nested three times",
            wrap(format!("self.eval(atob(\"{}\"))", b64(&nested3))),
            "<script>document.title='x'</script>".into(),
        ),
        (
            "utf-8 through escape",
            wrap(format!("eval(decodeURIComponent(escape(atob('{}'))))", base64::engine::general_purpose::STANDARD.encode("é=1".as_bytes()))),
            "<script>é=1</script>".into(),
        ),
        (
            "decodeURIComponent",
            wrap(format!("globalThis.eval(decodeURIComponent(\"{}\"))", percent("var s='ü';"))),
            "<script>var s='ü';</script>".into(),
        ),
        (
            "latin-1 declaration",
            legacy(WINDOWS_1252, "<meta charset=\"iso-8859-1\"><p>café</p>"),
            "<meta charset=\"utf-8\"><p>café</p>".into(),
        ),
        (
            "windows-1252 punctuation",
            legacy(WINDOWS_1252, "<meta http-equiv=\"Content-Type\" content=\"text/html; charset=windows-1252\"><p>“quoted” – €5</p>"),
            "<meta http-equiv=\"Content-Type\" content=\"text/html; charset=utf-8\"><p>“quoted” – €5</p>".into(),
        ),
        (
            "shift_jis",
            legacy(SHIFT_JIS, "<meta charset=\"shift_jis\"><button>ログイン</button>"),
            "<meta charset=\"utf-8\"><button>ログイン</button>".into(),
        ),
        ("koi8-r", legacy(KOI8_R, "<meta charset=koi8-r><a>Вход</a>"), "<meta charset=utf-8><a>Вход</a>".into()),
        (
            "declared latin-1, content utf-8",
            "<meta charset=\"iso-8859-1\"><p>naïve</p>".as_bytes().to_vec(),
            "<meta charset=\"utf-8\"><p>naïve</p>".into(),
        ),
        ("utf-8 bom", [&[0xEF, 0xBB, 0xBF][..], b"<p>ok</p>"].concat(), "<p>ok</p>".into()),
        (
            "utf-16le bom with utf-16 declaration",
            utf16("<meta charset=\"utf-16\"><p>héllo</p>", false),
            "<meta charset=\"utf-8\"><p>héllo</p>".into(),
        ),
        ("utf-16be bom", utf16("<p>hi ☃</p>", true), "<p>hi ☃</p>".into()),
        ("invalid utf-8", b"<p>a\xffb</p>".to_vec(), "<p>a\u{FFFD}b</p>".into()),
        (
            "undecodable payload verbatim",
            b"<script>eval(atob('!!!notbase64'))</script>".to_vec(),
            "<script>eval(atob('!!!notbase64'))</script>".into(),
        ),
        (
            "legacy charset plus wrapper",
            [legacy(WINDOWS_1252, "<meta charset=\"latin1\"><p>Olá</p>"), wrap(format!("eval(atob(\"{}\"))", b64("go()")))].concat(),
            "<meta charset=\"utf-8\"><p>Olá</p><script>go()</script>".into(),
        ),
    ]
}

fn c9_encoding() -> Outcome {
    let fixtures = encoding_fixtures();
    ensure!(fixtures.len() == 20, "{} fixtures", fixtures.len());
    for (name, input, expected) in &fixtures {
        let once = normalize_encodings(input);
        ensure!(&once == expected, "{name}: got {once:?}, expected {expected:?}");
        ensure!(normalize_encodings(once.as_bytes()) == once, "{name}: not idempotent");
    }
    Ok("20/20 fixtures canonical and idempotent".into())
}
