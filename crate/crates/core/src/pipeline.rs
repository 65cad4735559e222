//! End-to-end page classification: decode, parse, window, score.

use serde::{Deserialize, Serialize};

use crate::detector::{self, DetectorError, Scorer, Verdict};
use crate::parser::{self, ParsedDocument, PatchConfig};
use crate::window::{Label, WindowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub patches: PatchConfig,
    pub window: WindowConfig,
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            patches: PatchConfig::default(),
            window: WindowConfig::default(),
            threshold: detector::DEFAULT_THRESHOLD,
        }
    }
}

impl PipelineConfig {
    pub fn with_patches(patches: PatchConfig) -> Self {
        PipelineConfig { patches, ..Self::default() }
    }

    pub fn parse(&self, html: &[u8], url: &str) -> ParsedDocument {
        parser::parse_bytes(html, url, &self.patches)
    }

    pub fn classify<S: Scorer + ?Sized>(
        &self,
        scorer: &S,
        html: &[u8],
        url: &str,
    ) -> Result<(ParsedDocument, Verdict), DetectorError> {
        let doc = self.parse(html, url);
        let verdict = detector::classify_document(scorer, &doc, &self.window, self.threshold)?;
        Ok((doc, verdict))
    }

    /// Page-level phishing confidence, the quantity the adversary minimises.
    pub fn confidence<S: Scorer + ?Sized>(&self, scorer: &S, html: &str, url: &str) -> Result<f64, DetectorError> {
        Ok(self.classify(scorer, html.as_bytes(), url)?.1.confidence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPage {
    pub id: String,
    pub url: String,
    pub html: String,
    pub label: Label,
}

impl LabeledPage {
    pub fn new(id: impl Into<String>, url: impl Into<String>, html: impl Into<String>, label: Label) -> Self {
        LabeledPage { id: id.into(), url: url.into(), html: html.into(), label }
    }
}
