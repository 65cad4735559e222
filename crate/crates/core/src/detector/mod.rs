//! Chunk scoring, existential aggregation and dynamic merging.

pub mod external;
pub mod metrics;
pub mod reference;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::{render_parsed_text, ParsedDocument};
use crate::window::{self, Chunk, Label, WindowConfig, WindowError};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScorerError {
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    #[error("scorer timed out after {0} ms")]
    Timeout(u64),
    #[error("scorer protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("corpus contains only {0} examples")]
    DegenerateCorpus(Label),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Phishing probability of a chunk.
pub trait Scorer: Send + Sync {
    fn score(&self, chunk: &Chunk) -> Result<f64, ScorerError>;

    fn version(&self) -> String {
        "unversioned".to_string()
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, chunk: &Chunk) -> Result<f64, ScorerError> {
        (**self).score(chunk)
    }
    fn version(&self) -> String {
        (**self).version()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&self, chunk: &Chunk) -> Result<f64, ScorerError> {
        (**self).score(chunk)
    }
    fn version(&self) -> String {
        (**self).version()
    }
}

impl<S: Scorer + ?Sized> Scorer for std::sync::Arc<S> {
    fn score(&self, chunk: &Chunk) -> Result<f64, ScorerError> {
        (**self).score(chunk)
    }
    fn version(&self) -> String {
        (**self).version()
    }
}

/// Scorer backed by a closure; handy for stubs.
pub struct FnScorer<F>(pub F);

impl<F> Scorer for FnScorer<F>
where
    F: Fn(&Chunk) -> f64 + Send + Sync,
{
    fn score(&self, chunk: &Chunk) -> Result<f64, ScorerError> {
        Ok((self.0)(chunk))
    }

    fn version(&self) -> String {
        "stub".to_string()
    }
}

/// Wraps a scorer and counts chunk evaluations.
pub struct CountingScorer<S> {
    inner: S,
    calls: AtomicUsize,
}

impl<S: Scorer> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        CountingScorer { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: Scorer> Scorer for CountingScorer<S> {
    fn score(&self, chunk: &Chunk) -> Result<f64, ScorerError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.score(chunk)
    }

    fn version(&self) -> String {
        self.inner.version()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPrediction {
    pub chunk_index: usize,
    pub confidence: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecidedBy {
    Chunk,
    Merge,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub confidence: f64,
    pub chunk_trace: Vec<ChunkPrediction>,
    pub merge_trace: Vec<(usize, f64)>,
    pub decided_by: DecidedBy,
}

impl Verdict {
    pub fn is_phishing(&self) -> bool {
        self.label.is_phishing()
    }
}

pub fn label_for(confidence: f64, threshold: f64) -> Label {
    if confidence >= threshold {
        Label::Phishing
    } else {
        Label::Benign
    }
}

/// Tokenize and window a parsed document. A document without elements
/// yields one empty chunk so it can still be scored.
pub fn chunk_document(doc: &ParsedDocument, config: &WindowConfig) -> Result<Vec<Chunk>, WindowError> {
    let tokens = window::tokenize(&render_parsed_text(doc));
    if tokens.is_empty() {
        config.validate()?;
        return Ok(vec![Chunk {
            tokens: Vec::new(),
            token_elements: Vec::new(),
            token_span: (0, 0),
            element_range: (0, 0),
            label: None,
            split: false,
        }]);
    }
    window::make_windows_or_split(&tokens, config)
}

pub fn classify_document<S: Scorer + ?Sized>(
    scorer: &S,
    doc: &ParsedDocument,
    config: &WindowConfig,
    threshold: f64,
) -> Result<Verdict, DetectorError> {
    let chunks = chunk_document(doc, config)?;
    Ok(classify_chunks(scorer, &chunks, config.merge_enabled, threshold)?)
}

/// Phase 1 scores every chunk; if none reaches the threshold and merging is
/// enabled, prefixes of 2, 3, ... chunks are scored until one does.
pub fn classify_chunks<S: Scorer + ?Sized>(
    scorer: &S,
    chunks: &[Chunk],
    merge_enabled: bool,
    threshold: f64,
) -> Result<Verdict, ScorerError> {
    let mut chunk_trace = Vec::with_capacity(chunks.len());
    for (i, c) in chunks.iter().enumerate() {
        let p = scorer.score(c)?;
        chunk_trace.push(ChunkPrediction { chunk_index: i, confidence: p, label: label_for(p, threshold) });
    }
    let max_chunk = chunk_trace.iter().map(|c| c.confidence).fold(0.0, f64::max);
    if chunk_trace.iter().any(|c| c.label.is_phishing()) {
        return Ok(Verdict {
            label: Label::Phishing,
            confidence: max_chunk,
            chunk_trace,
            merge_trace: Vec::new(),
            decided_by: DecidedBy::Chunk,
        });
    }
    let mut merge_trace = Vec::new();
    if merge_enabled {
        for k in 2..=chunks.len() {
            let merged = window::merge_chunks(chunks, k).expect("k within bounds");
            let p = scorer.score(&merged)?;
            merge_trace.push((k, p));
            if p >= threshold {
                return Ok(Verdict {
                    label: Label::Phishing,
                    confidence: max_chunk.max(p),
                    chunk_trace,
                    merge_trace,
                    decided_by: DecidedBy::Merge,
                });
            }
        }
    }
    let confidence = merge_trace.iter().map(|(_, p)| *p).fold(max_chunk, f64::max);
    Ok(Verdict { label: Label::Benign, confidence, chunk_trace, merge_trace, decided_by: DecidedBy::None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunks(n: usize) -> Vec<Chunk> {
        (0..n)
            .map(|i| Chunk {
                tokens: vec![format!("c{i}")],
                token_elements: vec![i],
                token_span: (i, i + 1),
                element_range: (i, i),
                label: None,
                split: false,
            })
            .collect()
    }

    fn table_scorer(conf: Vec<f64>, merged: f64) -> impl Scorer {
        FnScorer(move |c: &Chunk| if c.len() == 1 { conf[c.token_span.0] } else { merged })
    }

    #[test]
    fn any_phishing_chunk_decides() {
        let v = classify_chunks(&table_scorer(vec![0.2, 0.7, 0.1], 0.0), &chunks(3), true, 0.5).unwrap();
        assert_eq!(v.label, Label::Phishing);
        assert_eq!(v.decided_by, DecidedBy::Chunk);
        assert_eq!(v.confidence, 0.7);
        assert!(v.merge_trace.is_empty());
    }

    #[test]
    fn sub_threshold_merge_stays_benign() {
        let v = classify_chunks(&table_scorer(vec![0.2, 0.2], 0.3), &chunks(2), true, 0.5).unwrap();
        assert_eq!(v.label, Label::Benign);
        assert_eq!(v.decided_by, DecidedBy::None);
        assert_eq!(v.merge_trace, vec![(2, 0.3)]);
        assert_eq!(v.confidence, 0.3);
    }

    #[test]
    fn merge_can_decide() {
        let v = classify_chunks(&table_scorer(vec![0.4, 0.4], 0.8), &chunks(2), true, 0.5).unwrap();
        assert_eq!(v.label, Label::Phishing);
        assert_eq!(v.decided_by, DecidedBy::Merge);
        assert_eq!(v.confidence, 0.8);
    }

    #[test]
    fn merge_disabled_skips_phase_two() {
        let v = classify_chunks(&table_scorer(vec![0.4, 0.4], 0.8), &chunks(2), false, 0.5).unwrap();
        assert_eq!(v.label, Label::Benign);
        assert!(v.merge_trace.is_empty());
    }

    #[test]
    fn merge_stops_at_first_signal() {
        let scorer = FnScorer(|c: &Chunk| if c.len() >= 3 { 0.9 } else { 0.1 });
        let v = classify_chunks(&scorer, &chunks(5), true, 0.5).unwrap();
        assert_eq!(v.merge_trace.iter().map(|m| m.0).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn aggregation_matches_or_for_all_label_combinations() {
        for mask in 0u32..256 {
            let conf: Vec<f64> = (0..8).map(|i| if mask >> i & 1 == 1 { 0.9 } else { 0.1 }).collect();
            let v = classify_chunks(&table_scorer(conf, 0.0), &chunks(8), false, 0.5).unwrap();
            assert_eq!(v.is_phishing(), mask != 0, "mask {mask:08b}");
        }
    }

    #[test]
    fn scorer_errors_propagate() {
        struct Down;
        impl Scorer for Down {
            fn score(&self, _: &Chunk) -> Result<f64, ScorerError> {
                Err(ScorerError::Timeout(10))
            }
        }
        assert!(classify_chunks(&Down, &chunks(2), true, 0.5).is_err());
    }

    #[test]
    fn empty_document_yields_one_chunk() {
        let doc = crate::parser::parse_document("", "", &Default::default());
        assert_eq!(chunk_document(&doc, &WindowConfig::default()).unwrap().len(), 1);
    }
}
