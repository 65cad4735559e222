//! Actionable-tag extraction.
//!
//! Raw HTML is reduced to an ordered list of whitelisted elements (headings,
//! paragraphs, links, lists, forms, title, footer, scripts, inputs, buttons,
//! iframes, meta and image maps) carrying lowercase text plus a small set of
//! relevant attributes. Hardening patches strip hidden content, neutralise
//! form/link sinks, and pin the title to static markup.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::css::{self, StyleRule};
use crate::encoding;
use crate::html::{self, Child, Dom, Node};
use crate::rebind;

/// Marker substituted for form actions and link targets that point nowhere useful.
pub const SUSPICIOUS_SINK: &str = "SUSPICIOUS_SINK";
pub const EMPTY_MARKER: &str = "<EMPTY>";
/// Inline script bodies longer than this are truncated in the rendered text.
pub const SCRIPT_RENDER_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagKind {
    H1,
    H2,
    H3,
    P,
    A,
    Ul,
    Ol,
    Li,
    Form,
    Title,
    Footer,
    Script,
    Input,
    Button,
    Iframe,
    Meta,
    Map,
    Area,
}

impl TagKind {
    pub const ALL: [TagKind; 18] = [
        TagKind::H1,
        TagKind::H2,
        TagKind::H3,
        TagKind::P,
        TagKind::A,
        TagKind::Ul,
        TagKind::Ol,
        TagKind::Li,
        TagKind::Form,
        TagKind::Title,
        TagKind::Footer,
        TagKind::Script,
        TagKind::Input,
        TagKind::Button,
        TagKind::Iframe,
        TagKind::Meta,
        TagKind::Map,
        TagKind::Area,
    ];

    pub fn from_tag_name(name: &str) -> Option<TagKind> {
        TagKind::ALL.into_iter().find(|k| k.as_str().eq_ignore_ascii_case(name))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TagKind::H1 => "h1",
            TagKind::H2 => "h2",
            TagKind::H3 => "h3",
            TagKind::P => "p",
            TagKind::A => "a",
            TagKind::Ul => "ul",
            TagKind::Ol => "ol",
            TagKind::Li => "li",
            TagKind::Form => "form",
            TagKind::Title => "title",
            TagKind::Footer => "footer",
            TagKind::Script => "script",
            TagKind::Input => "input",
            TagKind::Button => "button",
            TagKind::Iframe => "iframe",
            TagKind::Meta => "meta",
            TagKind::Map => "map",
            TagKind::Area => "area",
        }
    }

    /// Attributes kept in the parsed representation, in output order.
    pub fn relevant_attributes(self) -> &'static [&'static str] {
        match self {
            TagKind::A => &["href"],
            TagKind::Form => &["action", "method"],
            TagKind::Input => &["type", "name", "placeholder"],
            TagKind::Meta => &["http-equiv", "content", "name"],
            TagKind::Iframe => &["src"],
            TagKind::Script => &["src"],
            TagKind::Button => &["type"],
            TagKind::Area => &["href"],
            _ => &[],
        }
    }
}

impl fmt::Display for TagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedElement {
    pub kind: TagKind,
    pub text: String,
    pub attributes: Vec<(String, String)>,
    pub source_span: (usize, usize),
    pub visible: bool,
    pub order_index: usize,
}

impl ParsedElement {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    /// One line of the parsed-text grammar.
    pub fn render(&self) -> String {
        let mut line = String::with_capacity(self.text.len() + 16);
        line.push_str(self.kind.as_str());
        line.push_str(": ");
        if self.text.is_empty() {
            line.push_str(EMPTY_MARKER);
        } else if self.kind == TagKind::Script && self.text.chars().count() > SCRIPT_RENDER_LIMIT {
            let total = self.text.chars().count();
            line.extend(self.text.chars().take(SCRIPT_RENDER_LIMIT));
            line.push_str(&format!("…[+{} chars]", total - SCRIPT_RENDER_LIMIT));
        } else {
            line.push_str(&self.text);
        }
        for (k, v) in &self.attributes {
            line.push_str(" | ");
            line.push_str(k);
            line.push('=');
            line.push_str(v);
        }
        line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatchId {
    P1,
    P2,
    P3,
    #[serde(rename = "P4.1")]
    P4_1,
    P6,
}

impl fmt::Display for PatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatchId::P1 => "P1",
            PatchId::P2 => "P2",
            PatchId::P3 => "P3",
            PatchId::P4_1 => "P4.1",
            PatchId::P6 => "P6",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedDocument {
    pub elements: Vec<ParsedElement>,
    pub url: String,
    pub stylesheet_rules: Vec<StyleRule>,
    pub patch_trace: Vec<(PatchId, usize)>,
}

impl ParsedDocument {
    pub fn patch_count(&self, id: PatchId) -> usize {
        self.patch_trace.iter().find(|(p, _)| *p == id).map_or(0, |(_, n)| *n)
    }

    /// A copy with the elements at `masked` order indices removed and the
    /// remaining ones renumbered.
    pub fn without_elements(&self, masked: &[bool]) -> ParsedDocument {
        let mut elements: Vec<ParsedElement> = self
            .elements
            .iter()
            .zip(masked.iter().chain(std::iter::repeat(&false)))
            .filter(|(_, m)| !**m)
            .map(|(e, _)| e.clone())
            .collect();
        for (i, e) in elements.iter_mut().enumerate() {
            e.order_index = i;
        }
        ParsedDocument { elements, ..self.clone() }
    }

    /// Serialise the surviving elements back to flat markup.
    pub fn to_markup(&self) -> String {
        let mut out = String::new();
        for e in &self.elements {
            let tag = e.kind.as_str();
            out.push('<');
            out.push_str(tag);
            for (k, v) in &e.attributes {
                out.push_str(&format!(" {k}=\"{}\"", html::escape_attr(v)));
            }
            out.push('>');
            match e.kind {
                TagKind::Input | TagKind::Meta | TagKind::Area => {
                    out.push('\n');
                    continue;
                }
                // raw-text bodies must not be entity-escaped
                TagKind::Script => out.push_str(&e.text),
                _ => out.push_str(&html::escape_text(&e.text)),
            }
            out.push_str(&format!("</{tag}>\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    #[default]
    Syntactic,
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchConfig {
    pub p1_hidden_attr: bool,
    pub p2_css_display_none: bool,
    pub p3_form_action_validation: bool,
    pub p4_1_encoding_normalization: bool,
    pub p6_title_script_guard: bool,
    pub action_probe_mode: ProbeMode,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig::all_on()
    }
}

impl PatchConfig {
    pub fn all_on() -> Self {
        PatchConfig {
            p1_hidden_attr: true,
            p2_css_display_none: true,
            p3_form_action_validation: true,
            p4_1_encoding_normalization: true,
            p6_title_script_guard: true,
            action_probe_mode: ProbeMode::Syntactic,
        }
    }

    pub fn all_off() -> Self {
        PatchConfig {
            p1_hidden_attr: false,
            p2_css_display_none: false,
            p3_form_action_validation: false,
            p4_1_encoding_normalization: false,
            p6_title_script_guard: false,
            action_probe_mode: ProbeMode::Syntactic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionClass {
    ExternalValid,
    InternalSection,
    Suspicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeOutcome {
    Reachable,
    Unreachable,
    TimedOut,
}

/// Liveness check for form targets in network probe mode.
pub trait ActionProbe {
    fn probe(&self, url: &Url) -> ProbeOutcome;
}

const SINK_TOKENS: &[&str] = &["", "#", "#!", "#none"];

/// Syntactic classification of a form action (or link target).
pub fn validate_form_action(action_value: &str, base_url: &str) -> ActionClass {
    validate_form_action_with(action_value, base_url, ProbeMode::Syntactic, None)
}

pub fn validate_form_action_with(
    action_value: &str,
    base_url: &str,
    mode: ProbeMode,
    probe: Option<&dyn ActionProbe>,
) -> ActionClass {
    let value = action_value.trim();
    let lower = value.to_ascii_lowercase();
    if SINK_TOKENS.contains(&lower.as_str()) || lower.starts_with('#') || lower.starts_with("javascript:") {
        return ActionClass::InternalSection;
    }
    let resolved = match Url::parse(value) {
        Ok(u) => Some(u),
        Err(url::ParseError::RelativeUrlWithoutBase) => {
            Url::parse(base_url).ok().and_then(|b| b.join(value).ok())
        }
        Err(_) => None,
    };
    let Some(resolved) = resolved.filter(|u| u.host_str().is_some_and(|h| !h.is_empty())) else {
        return ActionClass::Suspicious;
    };
    match (mode, probe) {
        (ProbeMode::Network, Some(p)) => match p.probe(&resolved) {
            ProbeOutcome::Reachable | ProbeOutcome::TimedOut => ActionClass::ExternalValid,
            ProbeOutcome::Unreachable => ActionClass::Suspicious,
        },
        _ => ActionClass::ExternalValid,
    }
}

/// Why an element is not rendered, if it is hidden.
pub fn hiding_cause(node: &Node, rules: &[StyleRule]) -> Option<PatchId> {
    if node.has_attr("hidden") {
        return Some(PatchId::P1);
    }
    if node.attr("style").is_some_and(css::has_display_none) {
        return Some(PatchId::P1);
    }
    let id = node.attr("id");
    let class = node.attr("class");
    rules
        .iter()
        .any(|r| css::has_display_none(&r.declarations) && css::selector_matches(&r.selector, &node.name, id, class))
        .then_some(PatchId::P2)
}

/// Visibility of a single element from its own attributes and the page's
/// stylesheet rules (ancestors are not considered here).
pub fn resolve_visibility(node: &Node, rules: &[StyleRule]) -> bool {
    hiding_cause(node, rules).is_none()
}

/// Collapse whitespace, lowercase, and drop any code point that stays
/// uppercase after case folding.
pub fn normalize_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in word.chars().flat_map(char::to_lowercase) {
            if !c.is_uppercase() {
                out.push(c);
            }
        }
    }
    out
}

fn normalize_attr_value(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Decode (when P4.1 is on) and parse raw page bytes.
pub fn parse_bytes(bytes: &[u8], url: &str, config: &PatchConfig) -> ParsedDocument {
    parse_bytes_with_probe(bytes, url, config, None)
}

/// Page source as the parser sees it: encoding-normalized when P4.1 is on,
/// lossy UTF-8 otherwise.
pub fn decode_page(bytes: &[u8], config: &PatchConfig) -> String {
    if config.p4_1_encoding_normalization {
        encoding::normalize_encodings(bytes)
    } else {
        String::from_utf8_lossy(bytes).into_owned()
    }
}

pub fn parse_bytes_with_probe(
    bytes: &[u8],
    url: &str,
    config: &PatchConfig,
    probe: Option<&dyn ActionProbe>,
) -> ParsedDocument {
    if config.p4_1_encoding_normalization {
        let n = encoding::normalize_encodings_traced(bytes);
        let mut doc = parse_document_with_probe(&n.text, url, config, probe);
        if n.decoded_scripts > 0 || n.charset.used != "UTF-8" || n.charset.mismatch {
            let affected = n.decoded_scripts + usize::from(n.charset.used != "UTF-8" || n.charset.mismatch);
            doc.patch_trace.push((PatchId::P4_1, affected));
            doc.patch_trace.sort();
        }
        doc
    } else {
        parse_document_with_probe(&String::from_utf8_lossy(bytes), url, config, probe)
    }
}

pub fn parse_document(html: &str, url: &str, config: &PatchConfig) -> ParsedDocument {
    parse_document_with_probe(html, url, config, None)
}

pub fn parse_document_with_probe(
    html: &str,
    url: &str,
    config: &PatchConfig,
    probe: Option<&dyn ActionProbe>,
) -> ParsedDocument {
    let dom = Dom::parse(html);
    Extractor::new(html, &dom, url, config, probe).run()
}

struct Extractor<'a> {
    src: &'a str,
    dom: &'a Dom,
    url: &'a str,
    config: &'a PatchConfig,
    probe: Option<&'a dyn ActionProbe>,
    rules: Vec<StyleRule>,
    /// Per node: the patch that hides it (own attributes or an ancestor's).
    hidden: Vec<Option<PatchId>>,
    /// Attribute overrides from folded late-rebinding scripts.
    rebound: HashMap<usize, Vec<(String, String)>>,
    folded_scripts: Vec<bool>,
    trace: HashMap<PatchId, usize>,
}

impl<'a> Extractor<'a> {
    fn new(
        src: &'a str,
        dom: &'a Dom,
        url: &'a str,
        config: &'a PatchConfig,
        probe: Option<&'a dyn ActionProbe>,
    ) -> Self {
        let mut rules = Vec::new();
        for i in dom.find_all("style") {
            if let Some((s, e)) = dom.raw_body(i) {
                rules.extend(css::parse_stylesheet(&src[s..e]));
            }
        }
        Extractor {
            src,
            dom,
            url,
            config,
            probe,
            rules,
            hidden: vec![None; dom.nodes.len()],
            rebound: HashMap::new(),
            folded_scripts: vec![false; dom.nodes.len()],
            trace: HashMap::new(),
        }
    }

    fn enabled(&self, p: PatchId) -> bool {
        match p {
            PatchId::P1 => self.config.p1_hidden_attr,
            PatchId::P2 => self.config.p2_css_display_none,
            PatchId::P3 => self.config.p3_form_action_validation,
            PatchId::P4_1 => self.config.p4_1_encoding_normalization,
            PatchId::P6 => self.config.p6_title_script_guard,
        }
    }

    fn bump(&mut self, p: PatchId) {
        *self.trace.entry(p).or_default() += 1;
    }

    fn run(mut self) -> ParsedDocument {
        self.compute_visibility();
        if self.config.p3_form_action_validation {
            self.fold_rebinding_scripts();
        }
        let mut elements = Vec::new();
        self.walk(0, false, &mut elements);
        let mut patch_trace: Vec<(PatchId, usize)> = self.trace.into_iter().collect();
        patch_trace.sort();
        ParsedDocument { elements, url: self.url.to_string(), stylesheet_rules: self.rules, patch_trace }
    }

    fn compute_visibility(&mut self) {
        for i in self.dom.preorder() {
            let node = &self.dom.nodes[i];
            let own = hiding_cause(node, &self.rules).filter(|p| self.enabled(*p));
            let inherited = node.parent.and_then(|p| self.hidden[p]);
            // the nearest enabled cause wins, so attribution follows the closest hider
            self.hidden[i] = own.or(inherited);
        }
    }

    fn visible_ignoring_config(&self, i: usize) -> bool {
        std::iter::once(i)
            .chain(self.dom.ancestors(i))
            .all(|n| hiding_cause(&self.dom.nodes[n], &self.rules).is_none())
    }

    fn fold_rebinding_scripts(&mut self) {
        for i in self.dom.find_all("script") {
            if self.hidden[i].is_some() || self.dom.nodes[i].has_attr("src") {
                continue;
            }
            let Some((s, e)) = self.dom.raw_body(i) else { continue };
            let Some(ops) = rebind::parse_rebinding_script(&self.src[s..e], false) else { continue };
            let mut applied = false;
            for op in ops {
                if let Some(target) = rebind::resolve_target(self.dom, &op.target) {
                    let overrides = self.rebound.entry(target).or_default();
                    overrides.retain(|(k, _)| *k != op.attr);
                    overrides.push((op.attr, op.value));
                    applied = true;
                }
            }
            if applied {
                self.folded_scripts[i] = true;
                self.bump(PatchId::P3);
            }
        }
    }

    fn walk(&mut self, idx: usize, in_inert: bool, out: &mut Vec<ParsedElement>) {
        let children = self.dom.nodes[idx].children.clone();
        for child in children {
            let Child::Element(c) = child else { continue };
            let name = self.dom.nodes[c].name.as_str();
            // noscript and template content is never rendered by a scripting browser
            let inert = in_inert || name == "noscript" || name == "template";
            if !inert {
                if let Some(kind) = TagKind::from_tag_name(name) {
                    match self.hidden[c] {
                        Some(patch) => self.bump(patch),
                        None if self.folded_scripts[c] => {}
                        None => {
                            let el = self.element(c, kind, out.len());
                            out.push(el);
                        }
                    }
                }
            }
            self.walk(c, inert, out);
        }
    }

    fn element(&mut self, idx: usize, kind: TagKind, order_index: usize) -> ParsedElement {
        let text = match kind {
            TagKind::Script => match self.dom.raw_body(idx) {
                Some((s, e)) => normalize_text(&self.src[s..e]),
                None => String::new(),
            },
            TagKind::Title => {
                let raw = match self.dom.raw_body(idx) {
                    Some((s, e)) => html::decode_entities(&self.src[s..e]).into_owned(),
                    None => String::new(),
                };
                if self.config.p6_title_script_guard && raw.contains('<') {
                    let stripped = strip_markup(&raw);
                    if stripped != raw {
                        self.bump(PatchId::P6);
                    }
                    normalize_text(&stripped)
                } else {
                    normalize_text(&raw)
                }
            }
            TagKind::Iframe => String::new(),
            _ => {
                let mut buf = String::new();
                self.own_text(idx, &mut buf);
                normalize_text(&buf)
            }
        };

        let node = &self.dom.nodes[idx];
        let overrides = self.rebound.get(&idx).cloned().unwrap_or_default();
        let lookup = |name: &str| -> Option<String> {
            overrides
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.clone())
                .or_else(|| node.attr(name).map(str::to_string))
        };
        let mut attributes = Vec::new();
        for &name in kind.relevant_attributes() {
            if let Some(v) = lookup(name) {
                attributes.push((name.to_string(), normalize_attr_value(&v)));
            }
        }
        if kind == TagKind::A {
            // anchors with inline handlers carry their script in the representation
            for a in &node.attrs {
                if a.name.starts_with("on") && a.name.len() > 2 {
                    attributes.push((a.name.clone(), normalize_attr_value(&a.value)));
                }
            }
        }
        if self.config.p3_form_action_validation {
            let sink_attr = match kind {
                TagKind::Form => Some("action"),
                TagKind::A | TagKind::Area => Some("href"),
                _ => None,
            };
            if let Some(sink_attr) = sink_attr {
                for (k, v) in attributes.iter_mut() {
                    if k != sink_attr || v == SUSPICIOUS_SINK {
                        continue;
                    }
                    let class =
                        validate_form_action_with(v, self.url, self.config.action_probe_mode, self.probe);
                    if class != ActionClass::ExternalValid {
                        *v = SUSPICIOUS_SINK.to_string();
                        *self.trace.entry(PatchId::P3).or_default() += 1;
                    }
                }
            }
        }
        let node = &self.dom.nodes[idx];
        ParsedElement {
            kind,
            text,
            attributes,
            source_span: node.span,
            visible: self.visible_ignoring_config(idx),
            order_index,
        }
    }

    /// Text of `idx` excluding nested whitelisted elements (which are emitted
    /// on their own) and anything hidden by an enabled patch.
    fn own_text(&self, idx: usize, buf: &mut String) {
        for child in &self.dom.nodes[idx].children {
            match child {
                Child::Text((s, e)) => {
                    buf.push_str(&html::decode_entities(&self.src[*s..*e]));
                    buf.push(' ');
                }
                Child::RawText((s, e)) => {
                    if self.dom.nodes[idx].name == "textarea" {
                        buf.push_str(&html::decode_entities(&self.src[*s..*e]));
                        buf.push(' ');
                    }
                }
                Child::Element(c) => {
                    let n = &self.dom.nodes[*c];
                    if TagKind::from_tag_name(&n.name).is_some()
                        || self.hidden[*c].is_some()
                        || matches!(n.name.as_str(), "script" | "style" | "noscript" | "template" | "head")
                    {
                        // still separate words across the skipped element
                        buf.push(' ');
                        continue;
                    }
                    self.own_text(*c, buf);
                    buf.push(' ');
                }
            }
        }
    }
}

/// Drop tags from title text; script bodies embedded in it go too.
fn strip_markup(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('<') {
        out.push_str(&rest[..i]);
        out.push(' ');
        let after = &rest[i..];
        let lower = after.get(..7).map(str::to_ascii_lowercase);
        rest = if lower.as_deref() == Some("<script") {
            let l = after.to_ascii_lowercase();
            match l.find("</script") {
                Some(j) => after[j..].find('>').map_or("", |k| &after[j + k + 1..]),
                None => "",
            }
        } else {
            match after.find('>') {
                Some(j) => &after[j + 1..],
                None => "",
            }
        };
    }
    out.push_str(rest);
    out
}

/// Render a parsed document in the line grammar, one element per line.
pub fn render_parsed_text(doc: &ParsedDocument) -> String {
    let mut out = String::new();
    for (i, e) in doc.elements.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&e.render());
    }
    out
}

/// Line-delimited JSON element dump.
pub fn element_dump(doc: &ParsedDocument) -> String {
    let mut out = String::new();
    for e in &doc.elements {
        out.push_str(&serde_json::to_string(e).expect("element serialises"));
        out.push('\n');
    }
    out
}

/// Absolute http(s) link targets of `a`/`area` elements in source order,
/// hidden ones included, deduplicated.
pub fn extract_links(html: &str, base_url: &str) -> Vec<Url> {
    let dom = Dom::parse(html);
    let base = Url::parse(base_url).ok();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for i in dom.preorder() {
        let n = &dom.nodes[i];
        if n.name != "a" && n.name != "area" {
            continue;
        }
        let Some(href) = n.attr("href").map(str::trim) else { continue };
        let resolved = match &base {
            Some(b) => b.join(href).ok(),
            None => Url::parse(href).ok(),
        };
        let Some(mut u) = resolved.filter(|u| matches!(u.scheme(), "http" | "https")) else { continue };
        u.set_fragment(None);
        if base.as_ref().is_some_and(|b| {
            let mut b = b.clone();
            b.set_fragment(None);
            b == u
        }) {
            continue;
        }
        if seen.insert(u.to_string()) {
            out.push(u);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormField {
    pub input_type: String,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormInfo {
    /// Effective action after literal late-rebinding, unresolved.
    pub action: Option<String>,
    pub method: String,
    pub fields: Vec<FormField>,
}

/// Forms of a page with their effective targets. Rebinding scripts with
/// decoded values are honoured when `follow_decoded` is set.
pub fn extract_forms(html: &str, follow_decoded: bool) -> Vec<FormInfo> {
    let dom = Dom::parse(html);
    let mut overrides: HashMap<usize, String> = HashMap::new();
    for i in dom.find_all("script") {
        let Some((s, e)) = dom.raw_body(i) else { continue };
        let Some(ops) = rebind::parse_rebinding_script(&html[s..e], follow_decoded) else { continue };
        for op in ops.into_iter().filter(|o| o.attr == "action") {
            if let Some(t) = rebind::resolve_target(&dom, &op.target) {
                overrides.insert(t, op.value);
            }
        }
    }
    dom.find_all("form")
        .map(|f| {
            let node = &dom.nodes[f];
            let action = overrides.get(&f).cloned().or_else(|| node.attr("action").map(|s| s.trim().to_string()));
            let method = node.attr("method").unwrap_or("get").to_ascii_lowercase();
            let mut fields = Vec::new();
            let mut stack: Vec<usize> = node
                .children
                .iter()
                .rev()
                .filter_map(|c| if let Child::Element(e) = c { Some(*e) } else { None })
                .collect();
            while let Some(i) = stack.pop() {
                let n = &dom.nodes[i];
                if matches!(n.name.as_str(), "input" | "select" | "textarea") {
                    if let Some(name) = n.attr("name") {
                        let input_type = match n.name.as_str() {
                            "input" => n.attr("type").unwrap_or("text").to_ascii_lowercase(),
                            other => other.to_string(),
                        };
                        fields.push(FormField {
                            input_type,
                            name: name.to_string(),
                            value: n.attr("value").unwrap_or_default().to_string(),
                        });
                    }
                }
                for c in n.children.iter().rev() {
                    if let Child::Element(e) = c {
                        stack.push(*e);
                    }
                }
            }
            FormInfo { action, method, fields }
        })
        .collect()
}
