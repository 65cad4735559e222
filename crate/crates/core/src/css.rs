//! Minimal stylesheet handling: rule extraction from `<style>` blocks and
//! matching of simple selectors (tag, `.class`, `#id` and compounds of
//! those). Combinators, attribute selectors and pseudo-classes never match.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleRule {
    pub selector: String,
    pub declarations: String,
}

/// Split a stylesheet into top-level rules. At-rule blocks (`@media`, ...)
/// are skipped since their conditions cannot be evaluated statically.
pub fn parse_stylesheet(css: &str) -> Vec<StyleRule> {
    let css = strip_comments(css);
    let bytes = css.as_bytes();
    let mut rules = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let Some(open) = css[pos..].find('{').map(|i| pos + i) else { break };
        let selector = css[pos..open].trim();
        // find the matching close brace, honouring nesting
        let mut depth = 0usize;
        let mut close = bytes.len();
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            match b {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = i;
                        break;
                    }
                }
                _ => {}
            }
        }
        // at-rules without blocks (`@import url(x);`) sit in front of the selector
        let selector = match selector.rfind(';') {
            Some(i) if selector.starts_with('@') => selector[i + 1..].trim(),
            _ => selector,
        };
        if !selector.starts_with('@') && !selector.is_empty() {
            let body = &css[open + 1..close];
            rules.push(StyleRule {
                selector: selector.to_string(),
                declarations: body.trim().to_string(),
            });
        }
        pos = close + 1;
    }
    rules
}

fn strip_comments(css: &str) -> String {
    let mut out = String::with_capacity(css.len());
    let mut rest = css;
    while let Some(i) = rest.find("/*") {
        out.push_str(&rest[..i]);
        rest = match rest[i + 2..].find("*/") {
            Some(j) => &rest[i + 2 + j + 2..],
            None => "",
        };
    }
    out.push_str(rest);
    out
}

/// Iterate `(property, value)` pairs of a declaration block, lowercased and
/// with all whitespace removed. Malformed declarations are skipped.
pub fn declarations(block: &str) -> impl Iterator<Item = (String, String)> + '_ {
    block.split(';').filter_map(|decl| {
        let (prop, value) = decl.split_once(':')?;
        let prop: String = prop.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        let value: String =
            value.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        if prop.is_empty() || value.is_empty() || !prop.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return None;
        }
        Some((prop, value))
    })
}

/// True when the block contains a `display: none` declaration.
pub fn has_display_none(block: &str) -> bool {
    declarations(block).any(|(p, v)| p == "display" && v.trim_end_matches("!important") == "none")
}

/// Value of the last declaration of `prop` in the block.
pub fn property(block: &str, prop: &str) -> Option<String> {
    declarations(block).filter(|(p, _)| p == prop).map(|(_, v)| v).last()
}

#[derive(Debug, Default, PartialEq, Eq)]
struct Compound<'a> {
    tag: Option<&'a str>,
    id: Option<&'a str>,
    classes: Vec<&'a str>,
}

fn parse_compound(sel: &str) -> Option<Compound<'_>> {
    let sel = sel.trim();
    if sel.is_empty()
        || sel.contains(|c: char| c.is_whitespace() || matches!(c, '>' | '+' | '~' | ':' | '[' | '*' | '(' | ')'))
    {
        return None;
    }
    let mut out = Compound::default();
    let mut rest = sel;
    let tag_len = rest.find(['.', '#']).unwrap_or(rest.len());
    if tag_len > 0 {
        out.tag = Some(&rest[..tag_len]);
    }
    rest = &rest[tag_len..];
    while !rest.is_empty() {
        let kind = rest.as_bytes()[0];
        let body = &rest[1..];
        let len = body.find(['.', '#']).unwrap_or(body.len());
        if len == 0 {
            return None;
        }
        match kind {
            b'.' => out.classes.push(&body[..len]),
            b'#' => out.id = Some(&body[..len]),
            _ => return None,
        }
        rest = &body[len..];
    }
    Some(out)
}

/// Does `selector` (possibly a comma-separated list) match an element with
/// the given tag, id and class attribute?
pub fn selector_matches(selector: &str, tag: &str, id: Option<&str>, class_attr: Option<&str>) -> bool {
    selector.split(',').any(|part| {
        let Some(c) = parse_compound(part) else { return false };
        if let Some(t) = c.tag {
            if !t.eq_ignore_ascii_case(tag) {
                return false;
            }
        }
        if let Some(want) = c.id {
            if id != Some(want) {
                return false;
            }
        }
        c.classes
            .iter()
            .all(|want| class_attr.is_some_and(|cls| cls.split_ascii_whitespace().any(|have| have == *want)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_rules_and_skips_media_blocks() {
        let rules = parse_stylesheet(
            "/* c */ .x{display:none} @media print { .y { display:none } } #z , p { color: red; }",
        );
        let sels: Vec<_> = rules.iter().map(|r| r.selector.as_str()).collect();
        assert_eq!(sels, vec![".x", "#z , p"]);
    }

    #[test]
    fn display_none_is_whitespace_insensitive() {
        assert!(has_display_none("color:red; display : none"));
        assert!(has_display_none("DISPLAY:NONE !important"));
        assert!(!has_display_none("display:block"));
        assert!(!has_display_none("display"));
    }

    #[test]
    fn simple_selector_matching() {
        assert!(selector_matches(".x", "a", None, Some("y x")));
        assert!(selector_matches("a.x", "a", None, Some("x")));
        assert!(!selector_matches("p.x", "a", None, Some("x")));
        assert!(selector_matches("#login", "form", Some("login"), None));
        assert!(selector_matches("div, a", "a", None, None));
        // combinators and pseudo-classes are out of scope
        assert!(!selector_matches("div a", "a", None, None));
        assert!(!selector_matches("a:hover", "a", None, None));
    }
}
