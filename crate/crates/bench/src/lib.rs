//! Shared fixtures for the pipeline benchmarks.

use phishscan_core::corpus::{generate, PageStyle};
use phishscan_core::detector::metrics::train_on_pages;
use phishscan_core::{LabeledPage, PipelineConfig, ReferenceModel, TrainConfig};

/// A fixed mix of phishing and benign saved-style pages.
pub fn pages(n: usize) -> Vec<LabeledPage> {
    generate(n / 2, n - n / 2, PageStyle::Saved, 42)
}

/// A reference model trained on a small fixed corpus.
pub fn model() -> ReferenceModel {
    train_on_pages(&pages(80), &PipelineConfig::default(), &TrainConfig::default()).expect("training a fixed corpus")
}
