//! Static evasion-category heuristics over raw page source.

use std::fmt;
use std::sync::LazyLock;

use regex::bytes::Regex;
use serde::{Deserialize, Serialize};

use crate::css::{self, StyleRule};
use crate::encoding;
use crate::html::Dom;
use crate::parser::{ParsedDocument, TagKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EvasionCategory {
    Regular,
    BehavioralJS,
    Clickjacking,
    DOMManipulation,
    TextEncoding,
}

impl EvasionCategory {
    pub const ALL: [EvasionCategory; 5] = [
        EvasionCategory::Regular,
        EvasionCategory::BehavioralJS,
        EvasionCategory::Clickjacking,
        EvasionCategory::DOMManipulation,
        EvasionCategory::TextEncoding,
    ];

    /// Higher wins when several categories fire.
    pub fn precedence(self) -> u8 {
        match self {
            EvasionCategory::TextEncoding => 4,
            EvasionCategory::BehavioralJS => 3,
            EvasionCategory::DOMManipulation => 2,
            EvasionCategory::Clickjacking => 1,
            EvasionCategory::Regular => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EvasionCategory::Regular => "Regular",
            EvasionCategory::BehavioralJS => "BehavioralJS",
            EvasionCategory::Clickjacking => "Clickjacking",
            EvasionCategory::DOMManipulation => "DOMManipulation",
            EvasionCategory::TextEncoding => "TextEncoding",
        }
    }
}

impl fmt::Display for EvasionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EvasionCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EvasionCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown evasion category {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signal {
    pub id: String,
    pub category: EvasionCategory,
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvasionProfile {
    pub category: EvasionCategory,
    pub signals: Vec<Signal>,
}

macro_rules! re {
    ($name:ident, $pat:expr) => {
        static $name: LazyLock<Regex> = LazyLock::new(|| Regex::new($pat).unwrap());
    };
}

re!(SCRIPT, r"(?is)<script\b[^>]*>(.*?)</script\s*>");
re!(
    HANDLER_NAV,
    r#"(?i)\bon(?:mouse[a-z]*|click|dblclick|key[a-z]+|touch[a-z]+|pointer[a-z]+|wheel|scroll)\s*=\s*(?:"[^"]*\b(?:location|window\.open)\b[^"]*"|'[^']*\b(?:location|window\.open)\b[^']*')"#
);
re!(
    LISTENER_NAV,
    r#"(?i)addEventListener\(\s*['"](?:mouse[a-z]*|click|dblclick|key[a-z]+|touch[a-z]+|pointer[a-z]+|wheel|scroll)['"][^;]{0,200}?\b(?:location|window\.open)\b"#
);
re!(TIMER, r"(?i)\bset(?:Timeout|Interval)\s*\(");
re!(
    POPUP,
    r#"(?i)\bonbeforeunload\b|addEventListener\(\s*['"]beforeunload['"]|\bwindow\.open\s*\([^)]*\)\s*;?\s*(?:window\.|document\.|top\.)?location\b"#
);
re!(CREATE_FORM, r#"(?i)createElement\(\s*['"](?:form|input)['"]\s*\)"#);
re!(
    WRITE_FORM,
    r#"(?i)(?:\.innerHTML\s*\+?=|insertAdjacentHTML\s*\(|document\.write(?:ln)?\s*\()[^;]{0,400}?<\s*(?:form|input)\b"#
);
re!(SHOW_TOGGLE, r#"(?i)\.style\.display\s*=\s*['"](?:block|inline|inline-block|flex|grid|)['"]"#);
re!(CREDENTIAL, r"(?i)password|passwd|login|sign[- ]?in|getElementsByTagName\(\s*.form|forms\[");
re!(POINTER_NONE, r"(?i)pointer-events\s*:\s*none");

/// Assign one evasion category from the raw page bytes; `doc` supplies the
/// interactive elements the page presents.
pub fn profile(html: &[u8], doc: &ParsedDocument) -> EvasionProfile {
    let mut signals = Vec::new();
    let scripts: Vec<(usize, usize)> = SCRIPT
        .captures_iter(html)
        .filter_map(|c| c.get(1).map(|m| (m.start(), m.end())))
        .collect();

    let mut push = |id: &str, category, span: (usize, usize)| {
        signals.push(Signal { id: id.to_string(), category, span });
    };

    // text encoding
    for &(s, e) in &scripts {
        let body = String::from_utf8_lossy(&html[s..e]);
        if encoding::max_decode_depth(&body) >= 2 {
            push("nested-decode", EvasionCategory::TextEncoding, (s, e));
        }
        let total = body.chars().count();
        if total >= 64 {
            let ws = body.chars().filter(|c| c.is_whitespace()).count();
            if ws as f64 / total as f64 > 0.40 {
                push("whitespace-padding", EvasionCategory::TextEncoding, (s, e));
            }
        }
    }
    let charset = encoding::sniff_charset(html);
    if charset.mismatch {
        push("charset-mismatch", EvasionCategory::TextEncoding, charset.declared_span.unwrap_or((0, html.len().min(1))));
    }

    // behavioural JS
    for m in HANDLER_NAV.find_iter(html).chain(LISTENER_NAV.find_iter(html)) {
        push("event-navigation", EvasionCategory::BehavioralJS, (m.start(), m.end()));
    }
    for m in TIMER.find_iter(html) {
        if let Some(end) = timer_redirect(html, m.end()) {
            push("timer-redirect", EvasionCategory::BehavioralJS, (m.start(), end));
        }
    }
    for m in POPUP.find_iter(html) {
        push("popup-hook", EvasionCategory::BehavioralJS, (m.start(), m.end()));
    }

    // DOM manipulation
    for m in CREATE_FORM.find_iter(html).chain(WRITE_FORM.find_iter(html)) {
        push("dynamic-form", EvasionCategory::DOMManipulation, (m.start(), m.end()));
    }
    for &(s, e) in &scripts {
        let body = &html[s..e];
        if let Some(m) = SHOW_TOGGLE.find(body) {
            if CREDENTIAL.is_match(body) {
                push("credential-reveal", EvasionCategory::DOMManipulation, (s + m.start(), s + m.end()));
            }
        }
    }

    // clickjacking
    let text = String::from_utf8_lossy(html);
    let dom = Dom::parse(&text);
    let rules: Vec<StyleRule> = dom
        .find_all("style")
        .filter_map(|i| dom.raw_body(i))
        .flat_map(|(s, e)| css::parse_stylesheet(&text[s..e]))
        .collect();
    let interactive = doc
        .elements
        .iter()
        .any(|e| matches!(e.kind, TagKind::Input | TagKind::Button | TagKind::Form | TagKind::A))
        || ["input", "button", "form", "a"].iter().any(|t| dom.find_all(t).next().is_some());
    let pointer_none = POINTER_NONE.is_match(html);
    for i in dom.find_all("iframe") {
        let node = &dom.nodes[i];
        let mut decls: Vec<String> = rules
            .iter()
            .filter(|r| css::selector_matches(&r.selector, "iframe", node.attr("id"), node.attr("class")))
            .map(|r| r.declarations.clone())
            .collect();
        decls.extend(node.attr("style").map(str::to_string));
        let block = decls.join(";");
        let span = (node.span.0.min(html.len()), node.span.1.min(html.len()));
        let transparent = css::property(&block, "opacity").and_then(|v| v.parse::<f64>().ok()).is_some_and(|o| o <= 0.1)
            || css::property(&block, "visibility").is_some_and(|v| v == "hidden");
        let stacked = css::property(&block, "z-index").and_then(|v| v.parse::<i64>().ok()).is_some_and(|z| z > 0);
        if transparent && stacked && interactive {
            push("transparent-overlay", EvasionCategory::Clickjacking, span);
        }
        let full = |p: &str| css::property(&block, p).is_some_and(|v| v == "100%" || v == "100vw" || v == "100vh");
        if pointer_none && full("width") && full("height") {
            push("pointer-events-overlay", EvasionCategory::Clickjacking, span);
        }
    }

    signals.sort_by_key(|s| (s.span, s.id.clone()));
    let category = signals
        .iter()
        .map(|s| s.category)
        .max_by_key(|c| c.precedence())
        .unwrap_or(EvasionCategory::Regular);
    EvasionProfile { category, signals }
}

/// For a timer call whose argument list starts at `open`, return the end of
/// the call when it navigates and its delay is a positive literal.
fn timer_redirect(html: &[u8], open: usize) -> Option<usize> {
    let mut depth = 1usize;
    let mut last_comma = None;
    let mut quote: Option<u8> = None;
    let mut i = open;
    while i < html.len() && i < open + 2000 {
        let b = html[i];
        match quote {
            Some(_) if b == b'\\' => i += 1,
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None => match b {
                b'"' | b'\'' | b'`' => quote = Some(b),
                b'(' | b'{' | b'[' => depth += 1,
                b')' | b'}' | b']' => {
                    depth -= 1;
                    if depth == 0 {
                        let args = &html[open..i];
                        let nav = args.windows(8).any(|w| w.eq_ignore_ascii_case(b"location"));
                        let delay = last_comma
                            .and_then(|c| std::str::from_utf8(&html[c + 1..i]).ok())
                            .and_then(|d| d.trim().parse::<u64>().ok());
                        return (nav && delay.is_some_and(|d| d > 0)).then_some(i + 1);
                    }
                }
                b',' if depth == 1 => last_comma = Some(i),
                _ => {}
            },
        }
        i += 1;
    }
    None
}
