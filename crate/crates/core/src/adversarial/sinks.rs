//! Static simulation of the form sinks a page submits to at runtime, after
//! load-time scripts restore rewritten attributes.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use base64::Engine;
use regex::Regex;
use url::Url;

use crate::encoding::{decode_script_wrapper, parse_js_string, WrapperOutcome};
use crate::html::Dom;
use crate::rebind;

static INDIRECT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"^\s*var\s+([A-Za-z_$][\w$]*)\s*=\s*("(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')\s*;\s*eval\s*\(\s*atob\s*\(\s*([A-Za-z_$][\w$]*)\s*\)\s*\)\s*;?\s*$"#)
        .unwrap()
});

/// Script text as executed: decode-and-execute wrappers are unwrapped.
fn effective_script(body: &str) -> String {
    if let Some(c) = INDIRECT.captures(body) {
        if c[1] == c[3] {
            let decoded = parse_js_string(&c[2])
                .and_then(|lit| base64::engine::general_purpose::STANDARD.decode(lit.trim()).ok())
                .and_then(|b| String::from_utf8(b).ok());
            if let Some(text) = decoded {
                return effective_script(&text);
            }
        }
    }
    match decode_script_wrapper(body) {
        WrapperOutcome::Decoded { text, .. } => text,
        _ => body.to_string(),
    }
}

/// Resolved submission targets of every form, after script restoration.
/// A form with no action submits to the page itself.
pub fn form_sinks(html: &str, page_url: &str) -> BTreeSet<String> {
    let dom = Dom::parse(html);
    let mut actions: Vec<(usize, Option<String>)> =
        dom.find_all("form").map(|f| (f, dom.nodes[f].attr("action").map(|a| a.trim().to_string()))).collect();
    for s in dom.find_all("script") {
        let Some((a, b)) = dom.raw_body(s) else { continue };
        let Some(ops) = rebind::parse_rebinding_script(&effective_script(&html[a..b]), true) else { continue };
        for op in ops.into_iter().filter(|o| o.attr == "action") {
            let target = rebind::resolve_target(&dom, &op.target);
            if let Some(slot) = target.and_then(|t| actions.iter_mut().find(|(f, _)| *f == t)) {
                slot.1 = Some(op.value);
            }
        }
    }
    let base = Url::parse(page_url).ok();
    actions
        .into_iter()
        .map(|(_, action)| {
            let action = action.unwrap_or_default();
            match &base {
                Some(b) => b.join(&action).map(|u| u.to_string()).unwrap_or(action),
                None => action,
            }
        })
        .collect()
}
