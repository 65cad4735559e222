//! Page-level evaluation and grouped k-fold cross-validation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::reference::{self, ReferenceModel, TrainConfig};
use super::{chunk_document, DetectorError, Scorer};
use crate::pipeline::{LabeledPage, PipelineConfig};
use crate::window::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth.is_phishing(), predicted.is_phishing()) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self, median_latency_ms: f64) -> Metrics {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Metrics {
            accuracy: ratio(self.tp + self.tn, self.total()),
            precision,
            recall,
            f1,
            median_latency_ms,
            confusion: *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub median_latency_ms: f64,
    pub confusion: Confusion,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Classify every page end to end and compare against its label.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    pages: &[LabeledPage],
    config: &PipelineConfig,
) -> Result<Metrics, DetectorError> {
    let mut confusion = Confusion::default();
    let mut latencies = Vec::with_capacity(pages.len());
    for page in pages {
        let started = Instant::now();
        let (_, verdict) = config.classify(scorer, page.html.as_bytes(), &page.url)?;
        latencies.push(started.elapsed().as_secs_f64() * 1000.0);
        confusion.record(page.label, verdict.label);
    }
    Ok(confusion.metrics(median(&mut latencies)))
}

/// Train the reference scorer on the chunks of `pages`.
pub fn train_on_pages(
    pages: &[LabeledPage],
    pipeline: &PipelineConfig,
    train: &TrainConfig,
) -> Result<ReferenceModel, DetectorError> {
    let mut by_page = Vec::with_capacity(pages.len());
    for p in pages {
        let doc = pipeline.parse(p.html.as_bytes(), &p.url);
        by_page.push((chunk_document(&doc, &pipeline.window)?, p.label));
    }
    reference::train(&reference::chunk_examples(&by_page), train)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: Vec<Metrics>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

/// K-fold cross-validation grouped by page, so no page contributes chunks
/// to both sides of a split.
pub fn cross_validate(
    pages: &[LabeledPage],
    pipeline: &PipelineConfig,
    train: &TrainConfig,
) -> Result<CrossValidation, DetectorError> {
    let k = train.folds.max(2);
    let mut order: Vec<usize> = (0..pages.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(train.seed));
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let (held, kept): (Vec<_>, Vec<_>) = order.iter().enumerate().partition(|(pos, _)| pos % k == f);
        let held: Vec<LabeledPage> = held.into_iter().map(|(_, &i)| pages[i].clone()).collect();
        let kept: Vec<LabeledPage> = kept.into_iter().map(|(_, &i)| pages[i].clone()).collect();
        let model = train_on_pages(&kept, pipeline, train)?;
        folds.push(evaluate(&model, &held, pipeline)?);
    }
    let mean = |g: fn(&Metrics) -> f64| folds.iter().map(g).sum::<f64>() / folds.len() as f64;
    Ok(CrossValidation {
        mean_precision: mean(|m| m.precision),
        mean_recall: mean(|m| m.recall),
        mean_f1: mean(|m| m.f1),
        folds,
    })
}
