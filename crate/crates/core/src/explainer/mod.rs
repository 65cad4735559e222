//! Element importance and explainable warnings for flagged pages.

pub mod codebook;
pub mod importance;
pub mod prompt;
pub mod warning;

use thiserror::Error;

use crate::detector::{classify_document, Scorer};
use crate::parser::ParsedDocument;
use crate::pipeline::PipelineConfig;

pub use codebook::{Codebook, FeatureTerm};
pub use importance::{pipeline_confidence, tag_importance, ImportanceConfig, Importance, TagImportance};
pub use prompt::{build_prompt, parse_response, GeneratorError, WarningGenerator, WarningPrompt};
pub use warning::{build_warning, locate, resolve_location, template_warning, ExplainableWarning, GeneratorKind, TraceBundle, WarningFeature};

#[derive(Debug, Error)]
pub enum ExplainerError {
    #[error("all perturbation scores are equal; no explanation")]
    Degenerate,
    #[error("no influential elements to explain")]
    NoTopTags,
    #[error("page is not classified phishing (confidence {0:.3})")]
    NotPhishing(f64),
    #[error("scoring a perturbation failed: {0}")]
    Scoring(String),
    #[error("invalid warning: {0}")]
    InvalidWarning(String),
}

/// Importance ranking plus the warning built from its top elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub confidence: f64,
    pub importance: Importance,
    pub warning: ExplainableWarning,
}

/// Explain a phishing verdict end to end: score the page, rank its elements
/// with the surrogate, and build a warning from the top `cfg.top_k`.
pub fn explain<S: Scorer + ?Sized>(
    doc: &ParsedDocument,
    url: &str,
    scorer: &S,
    pipeline: &PipelineConfig,
    cfg: &ImportanceConfig,
    codebook: &Codebook,
    generator: Option<&dyn WarningGenerator>,
) -> Result<Explanation, ExplainerError> {
    let confidence = classify_document(scorer, doc, &pipeline.window, pipeline.threshold)
        .map_err(|e| ExplainerError::Scoring(e.to_string()))?
        .confidence;
    if confidence < pipeline.threshold {
        return Err(ExplainerError::NotPhishing(confidence));
    }
    let importance = tag_importance(doc, pipeline_confidence(scorer, pipeline.window, pipeline.threshold), cfg)?;
    let warning = build_warning(doc, url, importance.top(cfg.top_k), codebook, generator)?;
    Ok(Explanation { confidence, importance, warning })
}
