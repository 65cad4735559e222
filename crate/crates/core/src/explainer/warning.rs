//! Explainable warnings: element locators, the deterministic template
//! generator and the generator-with-fallback driver.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use url::Url;

use super::codebook::{self, Codebook};
use super::importance::TagImportance;
use super::prompt::{self, WarningGenerator};
use super::ExplainerError;
use crate::parser::{self, ActionClass, ParsedDocument, ParsedElement, TagKind};

pub const WARNING_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    External,
    Template,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningFeature {
    pub name: String,
    pub location: String,
    pub description: String,
    /// Order index of the located element.
    pub element: usize,
    /// The name is not in the codebook.
    #[serde(default)]
    pub novel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainableWarning {
    pub schema_version: u32,
    pub url: String,
    pub target_brand_guess: Option<String>,
    pub features: Vec<WarningFeature>,
    pub screenshot: Option<String>,
    pub generator: GeneratorKind,
    /// Why the external generator was not used, when it was configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

impl ExplainableWarning {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("warning serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Check the structural invariants against the document it describes.
    pub fn validate(&self, doc: &ParsedDocument, codebook: &Codebook) -> Result<(), ExplainerError> {
        for f in &self.features {
            if !f.novel && !codebook.contains(&f.name) {
                return Err(ExplainerError::InvalidWarning(format!("{:?} is not a codebook term", f.name)));
            }
            if resolve_location(doc, &f.location) != Some(f.element) {
                return Err(ExplainerError::InvalidWarning(format!("location {:?} does not resolve", f.location)));
            }
        }
        Ok(())
    }
}

/// Evidence handed to human reviewers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBundle {
    pub url: String,
    pub warning: ExplainableWarning,
    pub parsed_source: String,
    pub top_tags: Vec<TagImportance>,
}

const BRANDS: &[(&str, &str)] = &[
    ("paypal", "PayPal"),
    ("microsoft", "Microsoft"),
    ("office 365", "Microsoft"),
    ("outlook", "Microsoft"),
    ("onedrive", "Microsoft"),
    ("apple", "Apple"),
    ("icloud", "Apple"),
    ("amazon", "Amazon"),
    ("netflix", "Netflix"),
    ("facebook", "Facebook"),
    ("instagram", "Instagram"),
    ("whatsapp", "WhatsApp"),
    ("google", "Google"),
    ("gmail", "Google"),
    ("dhl", "DHL"),
    ("fedex", "FedEx"),
    ("usps", "USPS"),
    ("wells fargo", "Wells Fargo"),
    ("chase", "Chase"),
    ("bank of america", "Bank of America"),
    ("citibank", "Citibank"),
    ("hsbc", "HSBC"),
    ("docusign", "DocuSign"),
    ("dropbox", "Dropbox"),
    ("adobe", "Adobe"),
    ("linkedin", "LinkedIn"),
    ("coinbase", "Coinbase"),
    ("metamask", "MetaMask"),
    ("steam", "Steam"),
    ("att", "AT&T"),
];

static BRAND_RE: LazyLock<Regex> = LazyLock::new(|| {
    let alts: Vec<String> = BRANDS.iter().map(|(k, _)| regex::escape(k)).collect();
    Regex::new(&format!(r"(?i)\b({})\b", alts.join("|"))).unwrap()
});

static URGENCY_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(urgent|immediately|suspend(ed)?|locked|expire[sd]?|within 24 hours|within 48 hours|unusual activity|action required|verify (your|now)|confirm your|final notice|permanently|restricted|limited access|avoid (suspension|closure))\b",
    )
    .unwrap()
});

static LOCATOR_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(([a-z0-9]+) #(\d+)\)\s*$").unwrap());

fn brand_in(text: &str) -> Option<&'static str> {
    let key = BRAND_RE.captures(text)?.get(1)?.as_str().to_ascii_lowercase();
    BRANDS.iter().find(|(k, _)| *k == key).map(|(_, b)| *b)
}

/// First brand named in the title, headings, then anywhere on the page.
pub fn guess_brand(doc: &ParsedDocument) -> Option<String> {
    let priority = |e: &&ParsedElement| match e.kind {
        TagKind::Title => 0,
        TagKind::H1 | TagKind::H2 | TagKind::H3 => 1,
        _ => 2,
    };
    let mut els: Vec<&ParsedElement> = doc.elements.iter().collect();
    els.sort_by_key(|e| (priority(e), e.order_index));
    els.iter().find_map(|e| brand_in(&e.text)).map(str::to_string)
}

fn is_sign_in_form(doc: &ParsedDocument, form: usize) -> bool {
    doc.elements[form + 1..]
        .iter()
        .take_while(|e| e.kind != TagKind::Form)
        .any(|e| e.kind == TagKind::Input && matches!(e.attr("type"), Some("password" | "email")))
}

fn descriptor(doc: &ParsedDocument, e: &ParsedElement) -> &'static str {
    match e.kind {
        TagKind::Form if is_sign_in_form(doc, e.order_index) => "sign-in form",
        TagKind::Form => "form",
        TagKind::Input => match e.attr("type") {
            Some("password") => "password field",
            Some("email") => "email field",
            Some("submit") => "submit button",
            _ => "input field",
        },
        TagKind::Button => "button",
        TagKind::A => "link",
        TagKind::H1 | TagKind::H2 | TagKind::H3 => "heading",
        TagKind::P => "paragraph",
        TagKind::Title => "page title",
        TagKind::Script => "script",
        TagKind::Iframe => "embedded frame",
        TagKind::Meta => "page metadata",
        TagKind::Li | TagKind::Ul | TagKind::Ol => "list",
        _ => "element",
    }
}

/// Human-readable locator that names the element and ends with a
/// machine-resolvable `(kind #index)` suffix.
pub fn locate(doc: &ParsedDocument, order_index: usize) -> Option<String> {
    let e = doc.elements.get(order_index)?;
    let n = doc.elements.len().max(1);
    let position = match order_index * 3 / n {
        0 => "near the top of the page",
        1 => "mid-page",
        _ => "near the bottom of the page",
    };
    Some(format!("{} {} ({} #{})", descriptor(doc, e), position, e.kind, order_index))
}

/// The order index a locator refers to, if it names an existing element of
/// the stated kind.
pub fn resolve_location(doc: &ParsedDocument, location: &str) -> Option<usize> {
    let caps = LOCATOR_RE.captures(location)?;
    let idx: usize = caps[2].parse().ok()?;
    (doc.elements.get(idx)?.kind.as_str() == &caps[1]).then_some(idx)
}

fn snippet(text: &str) -> String {
    let t: String = text.chars().take(60).collect();
    if text.chars().count() > 60 {
        format!("{t}...")
    } else {
        t
    }
}

fn is_sink_link(e: &ParsedElement, url: &str) -> bool {
    e.kind == TagKind::A
        && e.attr("href").is_none_or(|h| {
            h == parser::SUSPICIOUS_SINK || parser::validate_form_action(h, url) == ActionClass::Suspicious
        })
}

/// The codebook term a top element maps to under the template rules.
pub fn template_term(doc: &ParsedDocument, e: &ParsedElement) -> &'static str {
    let url = &doc.url;
    if matches!(e.kind, TagKind::Form | TagKind::Input) {
        return codebook::CREDENTIAL_SOLICITATION;
    }
    if URGENCY_RE.is_match(&e.text) {
        return codebook::URGENCY_LANGUAGE;
    }
    if is_sink_link(e, url) {
        return codebook::NON_FUNCTIONAL_LINKS;
    }
    if brand_in(&e.text).is_some() {
        return codebook::BRAND_IMITATION;
    }
    if e.kind == TagKind::Meta && e.attr("http-equiv").is_some_and(|v| v.eq_ignore_ascii_case("refresh")) {
        return codebook::DECEPTIVE_REDIRECT;
    }
    if e.kind == TagKind::Script && (e.text.contains("location") || e.text.contains("window.open")) {
        return codebook::DECEPTIVE_REDIRECT;
    }
    codebook::DECEPTIVE_CONTENT
}

fn template_description(term: &str, e: &ParsedElement, brand: Option<&str>) -> String {
    let quoted = if e.text.is_empty() { String::new() } else { format!(" (\"{}\")", snippet(&e.text)) };
    match term {
        codebook::CREDENTIAL_SOLICITATION => match brand {
            Some(b) => format!("This form asks for your {b} sign-in details on a site that is not operated by {b}."),
            None => "This form collects sign-in or personal details and sends them to the page operator.".to_string(),
        },
        codebook::URGENCY_LANGUAGE => {
            format!("The wording{quoted} pressures you to act quickly, a common tactic to stop you from checking the site.")
        }
        codebook::NON_FUNCTIONAL_LINKS => {
            format!("This link{quoted} does not lead anywhere; it is there to make the page look legitimate.")
        }
        codebook::BRAND_IMITATION => format!(
            "The text{quoted} names {}, but the page is not hosted by that organization.",
            brand.unwrap_or("a well-known organization")
        ),
        codebook::DECEPTIVE_REDIRECT => "The page sends you to another address without asking.".to_string(),
        _ => format!("This content{quoted} strongly influenced the detection of this page as phishing."),
    }
}

/// Deterministic warning: one feature per top element.
pub fn template_warning(doc: &ParsedDocument, url: &str, top: &[TagImportance]) -> ExplainableWarning {
    let brand = guess_brand(doc);
    let features = top
        .iter()
        .filter_map(|t| {
            let e = doc.elements.get(t.order_index)?;
            let name = template_term(doc, e);
            Some(WarningFeature {
                name: name.to_string(),
                location: locate(doc, t.order_index)?,
                description: template_description(name, e, brand.as_deref()),
                element: t.order_index,
                novel: false,
            })
        })
        .collect();
    ExplainableWarning {
        schema_version: WARNING_SCHEMA_VERSION,
        url: url.to_string(),
        target_brand_guess: brand,
        features,
        screenshot: None,
        generator: GeneratorKind::Template,
        fallback_reason: None,
    }
}

/// Build a warning with the external generator when one is supplied, falling
/// back to the template rules if it fails or answers out of contract.
pub fn build_warning(
    doc: &ParsedDocument,
    url: &str,
    top: &[TagImportance],
    codebook: &Codebook,
    generator: Option<&dyn WarningGenerator>,
) -> Result<ExplainableWarning, ExplainerError> {
    if top.is_empty() {
        return Err(ExplainerError::NoTopTags);
    }
    let Some(generator) = generator else {
        return Ok(template_warning(doc, url, top));
    };
    let template = generator.template().unwrap_or(prompt::DEFAULT_PROMPT_TEMPLATE);
    let request = prompt::build_prompt_from(template, doc, url, top, codebook);
    let outcome = generator
        .generate(&request)
        .map_err(|e| e.to_string())
        .and_then(|text| prompt::parse_response(&text, doc, codebook).map_err(|e| e.to_string()));
    match outcome {
        Ok(parsed) => Ok(ExplainableWarning {
            schema_version: WARNING_SCHEMA_VERSION,
            url: url.to_string(),
            target_brand_guess: parsed.target_brand.or_else(|| guess_brand(doc)),
            features: parsed.features,
            screenshot: None,
            generator: GeneratorKind::External,
            fallback_reason: None,
        }),
        Err(reason) => {
            tracing::warn!(%reason, "warning generator failed, using template");
            let mut w = template_warning(doc, url, top);
            w.fallback_reason = Some(reason);
            Ok(w)
        }
    }
}

/// Whether the page URL plausibly belongs to the guessed brand.
pub fn host_matches_brand(url: &str, brand: &str) -> bool {
    let Some(host) = Url::parse(url).ok().and_then(|u| u.host_str().map(str::to_ascii_lowercase)) else {
        return false;
    };
    let key: String = brand.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
    host.split('.').any(|label| label == key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_document, PatchConfig};

    const URL: &str = "https://secure-login.example-verify.test/";

    fn doc() -> ParsedDocument {
        parse_document(
            r##"<title>PayPal: Log in</title><h1>Your account has been suspended</h1>
<p>intro text</p><p>more text</p>
<form action="https://drop.test/x"><input type="email" name="e"><input type="password" name="p"></form>
<a href="#">Privacy</a><p>end</p>"##,
            URL,
            &PatchConfig::all_on(),
        )
    }

    fn tag(i: usize) -> TagImportance {
        TagImportance { order_index: i, weight: 1.0, tokens: vec![] }
    }

    fn index_of(d: &ParsedDocument, kind: TagKind) -> usize {
        d.elements.iter().position(|e| e.kind == kind).unwrap()
    }

    #[test]
    fn template_maps_login_form_to_credential_solicitation() {
        let d = doc();
        let form = index_of(&d, TagKind::Form);
        let w = template_warning(&d, URL, &[tag(form)]);
        assert_eq!(w.features[0].name, codebook::CREDENTIAL_SOLICITATION);
        assert!(w.features[0].location.starts_with("sign-in form mid-page"));
        assert_eq!(w.target_brand_guess.as_deref(), Some("PayPal"));
        assert!(w.features[0].description.contains("PayPal"));
        w.validate(&d, &Codebook::default()).unwrap();
    }

    #[test]
    fn template_rules_cover_urgency_and_dead_links() {
        let d = doc();
        let h1 = index_of(&d, TagKind::H1);
        let a = index_of(&d, TagKind::A);
        let title = index_of(&d, TagKind::Title);
        let w = template_warning(&d, URL, &[tag(h1), tag(a), tag(title)]);
        let names: Vec<&str> = w.features.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, [codebook::URGENCY_LANGUAGE, codebook::NON_FUNCTIONAL_LINKS, codebook::BRAND_IMITATION]);
    }

    #[test]
    fn warning_round_trips() {
        let d = doc();
        let w = template_warning(&d, URL, &[tag(0), tag(1)]);
        assert_eq!(ExplainableWarning::from_json(&w.to_json()).unwrap(), w);
    }

    #[test]
    fn locators_resolve() {
        let d = doc();
        for i in 0..d.elements.len() {
            assert_eq!(resolve_location(&d, &locate(&d, i).unwrap()), Some(i));
        }
        assert_eq!(resolve_location(&d, "somewhere (form #0)"), None);
    }

    #[test]
    fn brand_host_check() {
        assert!(host_matches_brand("https://www.paypal.com/", "PayPal"));
        assert!(!host_matches_brand(URL, "PayPal"));
    }
}
