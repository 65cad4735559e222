//! Prompt construction and response validation for an external generative
//! text service. The transport lives with the caller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::codebook::Codebook;
use super::importance::TagImportance;
use super::warning::{locate, resolve_location, WarningFeature};
use crate::parser::{render_parsed_text, ParsedDocument};

pub const PROMPT_VERSION: u32 = 1;

/// Default prompt template. Placeholders: `{url}`, `{codebook}`, `{tags}`,
/// `{parsed}`.
pub const DEFAULT_PROMPT_TEMPLATE: &str = "\
You are assisting a phishing detection system. The web page at {url} was classified as phishing.
Below are the page's parsed source code and the elements that most influenced the classification.

Explain to a non-expert visitor why this page is suspicious. Only describe features that are visible on the page.
Choose every feature name from this list:
{codebook}
If a visible feature clearly supports the detection but none of the names fits, you may use a new short name.

For the location, copy the locator of the element exactly as given below.

Most influential elements:
{tags}

Parsed source:
{parsed}

Answer with JSON only, in this form:
{\"target_brand\": \"<organization being imitated or null>\", \"features\": [{\"name\": \"<feature name>\", \"location\": \"<locator>\", \"description\": \"<one or two sentences>\"}]}
";

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("generator unavailable: {0}")]
    Unavailable(String),
    #[error("generator timed out after {0} ms")]
    Timeout(u64),
    #[error("malformed generator response: {0}")]
    Malformed(String),
}

/// A rendered prompt ready to send.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarningPrompt {
    pub version: u32,
    pub text: String,
}

pub trait WarningGenerator: Send + Sync {
    fn generate(&self, prompt: &WarningPrompt) -> Result<String, GeneratorError>;

    /// Prompt template replacing [`DEFAULT_PROMPT_TEMPLATE`].
    fn template(&self) -> Option<&str> {
        None
    }
}

pub fn build_prompt(doc: &ParsedDocument, url: &str, top: &[TagImportance], codebook: &Codebook) -> WarningPrompt {
    build_prompt_from(DEFAULT_PROMPT_TEMPLATE, doc, url, top, codebook)
}

pub fn build_prompt_from(
    template: &str,
    doc: &ParsedDocument,
    url: &str,
    top: &[TagImportance],
    codebook: &Codebook,
) -> WarningPrompt {
    let terms: Vec<String> = codebook.terms.iter().map(|t| format!("- {}: {}", t.term, t.definition)).collect();
    let tags: Vec<String> = top
        .iter()
        .filter_map(|t| {
            let e = doc.elements.get(t.order_index)?;
            Some(format!("- {} -> {}", locate(doc, t.order_index)?, e.render()))
        })
        .collect();
    let text = template
        .replace("{url}", url)
        .replace("{codebook}", &terms.join("\n"))
        .replace("{tags}", &tags.join("\n"))
        .replace("{parsed}", &render_parsed_text(doc));
    WarningPrompt { version: PROMPT_VERSION, text }
}

#[derive(Debug, Deserialize)]
struct RawFeature {
    #[serde(alias = "feature", alias = "feature_name")]
    name: String,
    location: String,
    description: String,
}

#[derive(Debug, Deserialize)]
struct RawResponse {
    #[serde(default)]
    target_brand: Option<String>,
    features: Vec<RawFeature>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub target_brand: Option<String>,
    pub features: Vec<WarningFeature>,
}

/// Validate a generator answer. Names outside the codebook are kept with
/// the novel flag; features whose location does not resolve are dropped.
pub fn parse_response(text: &str, doc: &ParsedDocument, codebook: &Codebook) -> Result<ParsedResponse, GeneratorError> {
    let body = text.trim().trim_start_matches("```json").trim_start_matches("```").trim_end_matches("```").trim();
    let raw: RawResponse = serde_json::from_str(body).map_err(|e| GeneratorError::Malformed(e.to_string()))?;
    let features: Vec<WarningFeature> = raw
        .features
        .into_iter()
        .filter_map(|f| {
            let element = resolve_location(doc, &f.location)?;
            let name = f.name.trim();
            if name.is_empty() || f.description.trim().is_empty() {
                return None;
            }
            let (name, novel) = match codebook.canonical(name) {
                Some(c) => (c.to_string(), false),
                None => (name.to_string(), true),
            };
            Some(WarningFeature { name, location: f.location, description: f.description.trim().to_string(), element, novel })
        })
        .collect();
    if features.is_empty() {
        return Err(GeneratorError::Malformed("no feature with a resolvable location".into()));
    }
    let target_brand = raw.target_brand.filter(|b| !b.trim().is_empty() && !b.eq_ignore_ascii_case("null"));
    Ok(ParsedResponse { target_brand, features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainer::warning::{build_warning, GeneratorKind};
    use crate::parser::{parse_document, PatchConfig};

    const URL: &str = "https://fb-privacy-center.example.test/";

    fn doc() -> ParsedDocument {
        parse_document(
            "<h1>We have suspended your page</h1><p>Facebook Privacy Center</p><form action=\"/s\"><input type=\"password\" name=\"p\"></form>",
            URL,
            &PatchConfig::all_on(),
        )
    }

    struct Canned(Result<String, ()>);
    impl WarningGenerator for Canned {
        fn generate(&self, _: &WarningPrompt) -> Result<String, GeneratorError> {
            self.0.clone().map_err(|_| GeneratorError::Unavailable("connection refused".into()))
        }
    }

    fn top() -> Vec<TagImportance> {
        vec![TagImportance { order_index: 0, weight: 0.5, tokens: vec![] }]
    }

    #[test]
    fn prompt_contains_inputs() {
        let d = doc();
        let p = build_prompt(&d, URL, &top(), &Codebook::default());
        assert!(p.text.contains(URL));
        assert!(p.text.contains("heading near the top of the page (h1 #0)"));
        assert!(p.text.contains("Mismatched URLs"));
        assert!(p.text.contains("h1: we have suspended your page"));
    }

    #[test]
    fn novel_names_are_flagged() {
        let d = doc();
        let loc = locate(&d, 0).unwrap();
        let reply = format!(
            r#"{{"target_brand":"Facebook","features":[{{"name":"Grammatical errors","location":"{loc}","description":"odd wording"}},{{"name":"Fake deadline","location":"{loc}","description":"made-up date"}}]}}"#
        );
        let w = build_warning(&d, URL, &top(), &Codebook::default(), Some(&Canned(Ok(reply)))).unwrap();
        assert_eq!(w.generator, GeneratorKind::External);
        assert!(!w.features[0].novel);
        assert!(w.features[1].novel);
        w.validate(&d, &Codebook::default()).unwrap();
    }

    #[test]
    fn generator_down_falls_back_to_template() {
        let d = doc();
        let w = build_warning(&d, URL, &top(), &Codebook::default(), Some(&Canned(Err(())))).unwrap();
        assert_eq!(w.generator, GeneratorKind::Template);
        assert!(w.fallback_reason.unwrap().contains("unavailable"));
    }

    #[test]
    fn unresolvable_locations_are_rejected() {
        let d = doc();
        let reply = r#"{"features":[{"name":"Urgency language","location":"the sidebar","description":"x"}]}"#;
        assert!(parse_response(reply, &d, &Codebook::default()).is_err());
    }
}
