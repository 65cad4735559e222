//! Span-based source edits.

use crate::html::Token;

#[derive(Debug, Default)]
pub(crate) struct Editor {
    edits: Vec<(usize, usize, usize, String)>,
}

impl Editor {
    pub fn replace(&mut self, span: (usize, usize), text: impl Into<String>) {
        let seq = self.edits.len();
        self.edits.push((span.0, span.1, seq, text.into()));
    }

    pub fn insert(&mut self, at: usize, text: impl Into<String>) {
        self.replace((at, at), text);
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn apply(mut self, src: &str) -> String {
        // later edits first, so earlier spans stay valid; same-point inserts keep call order
        self.edits.sort_by(|a, b| (b.0, b.2).cmp(&(a.0, a.2)));
        let mut out = src.to_string();
        for (s, e, _, text) in self.edits {
            out.replace_range(s..e, &text);
        }
        out
    }
}

/// Byte offset just after the tag name of a start tag at `tag_start`.
pub(crate) fn after_tag_name(src: &str, tag_start: usize, name: &str) -> usize {
    (tag_start + 1 + name.len()).min(src.len())
}

/// Offset of the first `</name>` end tag, if any.
pub(crate) fn end_tag_pos(tokens: &[Token], name: &str) -> Option<usize> {
    tokens.iter().find_map(|t| match t {
        Token::EndTag { name: n, span } if n == name => Some(span.0),
        _ => None,
    })
}

/// Where body-level content is appended: before `</body>`, else before
/// `</html>`, else at the end.
pub(crate) fn body_end(tokens: &[Token], src: &str) -> usize {
    end_tag_pos(tokens, "body").or_else(|| end_tag_pos(tokens, "html")).unwrap_or(src.len())
}

pub(crate) fn js_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '<' => out.push_str("\\x3c"),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

/// A fresh id with the given prefix that does not occur in `src`.
pub(crate) struct IdGen<'a> {
    src: &'a str,
    prefix: &'static str,
    next: usize,
}

impl<'a> IdGen<'a> {
    pub fn new(src: &'a str, prefix: &'static str) -> Self {
        IdGen { src, prefix, next: 0 }
    }

    pub fn fresh(&mut self) -> String {
        loop {
            let id = format!("{}{}", self.prefix, self.next);
            self.next += 1;
            if !self.src.contains(&id) {
                return id;
            }
        }
    }
}
