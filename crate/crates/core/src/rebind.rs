//! Static analysis of scripts that only re-target link and form sinks
//! (`document.getElementById('f').action = '...'`).

use std::sync::LazyLock;

use regex::Regex;

use crate::encoding::parse_decode_expr;
use crate::html::Dom;

const STR: &str = r#"'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*""#;

static WRAPPER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"^\s*(?:(?:window|document)\.addEventListener\(\s*['"](?:load|DOMContentLoaded)['"]\s*,\s*function\s*\(\s*\)\s*\{(?P<a>[\s\S]*)\}\s*\)|window\.onload\s*=\s*function\s*\(\s*\)\s*\{(?P<b>[\s\S]*)\})\s*;?\s*$"#,
    )
    .unwrap()
});

static STATEMENT: LazyLock<Regex> = LazyLock::new(|| {
    let value = format!(r#"(?:(?:window\.)?(?:atob|unescape|decodeURIComponent)\(\s*(?:{STR})\s*\)|{STR})"#);
    Regex::new(&format!(
        r#"^\s*(?:document\.getElementById\(\s*(?P<id>{STR})\s*\)|document\.forms\[\s*(?P<n>\d+)\s*\]|document\.querySelector\(\s*(?P<sel>{STR})\s*\))\s*(?:\.\s*(?P<prop>action|href)\s*=\s*(?P<v1>{value})|\.\s*setAttribute\(\s*(?P<an>{STR})\s*,\s*(?P<v2>{value})\s*\))\s*;?"#
    ))
    .unwrap()
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Id(String),
    Form(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rebinding {
    pub target: Target,
    pub attr: String,
    pub value: String,
    /// The value was produced by a decoder call rather than a plain literal.
    pub decoded: bool,
}

/// Parse a script body consisting only of sink rebinding statements.
/// Returns `None` if anything else appears in the body. With
/// `allow_decoded` unset, values must be plain string literals.
pub fn parse_rebinding_script(body: &str, allow_decoded: bool) -> Option<Vec<Rebinding>> {
    let inner = match WRAPPER.captures(body) {
        Some(c) => c.name("a").or_else(|| c.name("b")).map(|m| m.as_str()).unwrap_or(""),
        None => body,
    };
    let mut rest = inner;
    let mut out = Vec::new();
    while !rest.trim().is_empty() {
        let caps = STATEMENT.captures(rest)?;
        let target = if let Some(id) = caps.name("id") {
            Target::Id(crate::encoding::parse_js_string(id.as_str())?)
        } else if let Some(n) = caps.name("n") {
            Target::Form(n.as_str().parse().ok()?)
        } else {
            let sel = crate::encoding::parse_js_string(caps.name("sel")?.as_str())?;
            Target::Id(sel.strip_prefix('#')?.to_string())
        };
        let (attr, raw_value) = match caps.name("prop") {
            Some(p) => (p.as_str().to_string(), caps.name("v1")?.as_str()),
            None => {
                let an = crate::encoding::parse_js_string(caps.name("an")?.as_str())?;
                if an != "action" && an != "href" {
                    return None;
                }
                (an, caps.name("v2")?.as_str())
            }
        };
        let expr = parse_decode_expr(raw_value)?;
        let decoded = !expr.decoders.is_empty();
        if decoded && !allow_decoded {
            return None;
        }
        let value = expr.evaluate().ok()?;
        out.push(Rebinding { target, attr, value, decoded });
        rest = &rest[caps.get(0)?.end()..];
    }
    (!out.is_empty()).then_some(out)
}

/// Resolve a rebinding target to a node index in `dom`.
pub fn resolve_target(dom: &Dom, target: &Target) -> Option<usize> {
    match target {
        Target::Id(id) => dom.preorder().into_iter().find(|&i| dom.nodes[i].attr("id") == Some(id.as_str())),
        Target::Form(n) => dom.find_all("form").nth(*n),
    }
}
