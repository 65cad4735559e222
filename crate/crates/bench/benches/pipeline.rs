use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use phishscan_bench::{model, pages};
use phishscan_core::window::tokenize;
use phishscan_core::{make_windows, normalize_encodings, optimize, render_parsed_text, Label, OptimizerConfig, PipelineConfig};

fn parse(c: &mut Criterion) {
    let pages = pages(20);
    let pipeline = PipelineConfig::default();
    c.bench_function("parse_20_pages", |b| {
        b.iter(|| {
            for p in &pages {
                black_box(pipeline.parse(black_box(p.html.as_bytes()), &p.url));
            }
        })
    });
    c.bench_function("normalize_encodings_20_pages", |b| {
        b.iter(|| {
            for p in &pages {
                black_box(normalize_encodings(black_box(p.html.as_bytes())));
            }
        })
    });
}

fn windows(c: &mut Criterion) {
    let pipeline = PipelineConfig::default();
    let tokens: Vec<_> = pages(20)
        .iter()
        .map(|p| tokenize(&render_parsed_text(&pipeline.parse(p.html.as_bytes(), &p.url))))
        .collect();
    c.bench_function("make_windows_20_pages", |b| {
        b.iter(|| {
            for t in &tokens {
                black_box(make_windows(black_box(t), &pipeline.window).expect("elements fit the window"));
            }
        })
    });
}

fn classify(c: &mut Criterion) {
    let model = model();
    let pages = pages(20);
    let pipeline = PipelineConfig::default();
    c.bench_function("classify_20_pages", |b| {
        b.iter(|| {
            for p in &pages {
                black_box(pipeline.classify(&model, p.html.as_bytes(), &p.url).expect("reference scorer"));
            }
        })
    });
}

fn optimizer(c: &mut Criterion) {
    let model = model();
    let pipeline = PipelineConfig::default();
    let page = pages(20).into_iter().find(|p| p.label == Label::Phishing).expect("a phishing page");
    let config = OptimizerConfig::default();
    let mut group = c.benchmark_group("optimizer");
    group.sample_size(10);
    group.bench_function("full_budget_one_page", |b| {
        b.iter(|| {
            optimize(&page.id, &page.html, &page.url, |h: &str| pipeline.confidence(&model, h, &page.url), &config)
                .expect("optimizer run")
        })
    });
    group.finish();
}

criterion_group!(benches, parse, windows, classify, optimizer);
criterion_main!(benches);
