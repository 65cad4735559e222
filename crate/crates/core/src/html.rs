//! Permissive HTML tokenizer and tree builder.
//!
//! This is not a full HTML5 tree-construction implementation. It recovers
//! tag soup the way browsers do for the cases that matter to actionable-tag
//! extraction (implicit `p`/`li`/`a` closing, void elements, raw-text
//! elements) and keeps byte spans into the source for every node.

use std::borrow::Cow;

pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub value: String,
    /// Span of the whole `name="value"` text inside the start tag.
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    StartTag {
        name: String,
        attrs: Vec<Attribute>,
        self_closing: bool,
        span: Span,
    },
    EndTag {
        name: String,
        span: Span,
    },
    Text {
        span: Span,
    },
    /// Content of a raw-text or RCDATA element (`script`, `style`, `title`, ...).
    RawText {
        span: Span,
    },
    Comment {
        span: Span,
    },
    Doctype {
        span: Span,
    },
}

impl Token {
    pub fn span(&self) -> Span {
        match self {
            Token::StartTag { span, .. }
            | Token::EndTag { span, .. }
            | Token::Text { span }
            | Token::RawText { span }
            | Token::Comment { span }
            | Token::Doctype { span } => *span,
        }
    }
}

const VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "keygen", "link", "meta", "param",
    "source", "track", "wbr",
];

const RAW_TEXT: &[&str] = &[
    "script", "style", "noscript", "textarea", "title", "xmp", "iframe", "noembed", "noframes",
];

pub fn is_void(name: &str) -> bool {
    VOID.contains(&name)
}

pub fn is_raw_text(name: &str) -> bool {
    RAW_TEXT.contains(&name)
}

/// Tokenize `src` into a flat token stream. Never fails.
pub fn tokenize(src: &str) -> Vec<Token> {
    Lexer { src, bytes: src.as_bytes(), pos: 0, out: Vec::new() }.run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    out: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn run(mut self) -> Vec<Token> {
        let mut text_start = 0;
        while self.pos < self.bytes.len() {
            if self.bytes[self.pos] != b'<' {
                self.pos += 1;
                continue;
            }
            let lt = self.pos;
            let next = self.bytes.get(lt + 1).copied();
            let handled = match next {
                Some(b'!') => {
                    self.flush_text(text_start, lt);
                    self.markup_declaration(lt);
                    true
                }
                Some(b'?') => {
                    self.flush_text(text_start, lt);
                    let end = self.find_byte(lt, b'>');
                    self.out.push(Token::Comment { span: (lt, end) });
                    self.pos = end;
                    true
                }
                Some(b'/') => match self.bytes.get(lt + 2) {
                    Some(c) if c.is_ascii_alphabetic() => {
                        self.flush_text(text_start, lt);
                        self.end_tag(lt);
                        true
                    }
                    Some(b'>') => {
                        // `</>` is dropped entirely
                        self.flush_text(text_start, lt);
                        self.pos = lt + 3;
                        true
                    }
                    _ => false,
                },
                Some(c) if c.is_ascii_alphabetic() => {
                    self.flush_text(text_start, lt);
                    self.start_tag(lt);
                    true
                }
                _ => false,
            };
            if handled {
                text_start = self.pos;
            } else {
                self.pos += 1;
            }
        }
        self.flush_text(text_start, self.bytes.len());
        self.out
    }

    fn flush_text(&mut self, start: usize, end: usize) {
        if end > start {
            self.out.push(Token::Text { span: (start, end) });
        }
    }

    fn find_byte(&self, from: usize, b: u8) -> usize {
        match self.bytes[from..].iter().position(|&x| x == b) {
            Some(i) => from + i + 1,
            None => self.bytes.len(),
        }
    }

    fn markup_declaration(&mut self, lt: usize) {
        if self.bytes[lt..].starts_with(b"<!--") {
            let end = match self.src[lt + 4..].find("-->") {
                Some(i) => lt + 4 + i + 3,
                None => self.bytes.len(),
            };
            self.out.push(Token::Comment { span: (lt, end) });
            self.pos = end;
        } else {
            let end = self.find_byte(lt, b'>');
            let is_doctype = self.bytes[lt + 2..]
                .iter()
                .take(7)
                .map(|b| b.to_ascii_lowercase())
                .eq(b"doctype".iter().copied());
            if is_doctype {
                self.out.push(Token::Doctype { span: (lt, end) });
            } else {
                self.out.push(Token::Comment { span: (lt, end) });
            }
            self.pos = end;
        }
    }

    fn tag_name(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() || b == b'/' || b == b'>' {
                break;
            }
            self.pos += 1;
        }
        self.src[start..self.pos].to_ascii_lowercase()
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn end_tag(&mut self, lt: usize) {
        self.pos = lt + 2;
        let name = self.tag_name();
        let end = self.find_byte(self.pos, b'>');
        self.pos = end;
        self.out.push(Token::EndTag { name, span: (lt, end) });
    }

    fn start_tag(&mut self, lt: usize) {
        self.pos = lt + 1;
        let name = self.tag_name();
        let mut attrs: Vec<Attribute> = Vec::new();
        let mut self_closing = false;
        loop {
            self.skip_ws();
            if self.pos >= self.bytes.len() {
                break;
            }
            match self.bytes[self.pos] {
                b'>' => {
                    self.pos += 1;
                    break;
                }
                b'/' => {
                    self.pos += 1;
                    if self.bytes.get(self.pos) == Some(&b'>') {
                        self_closing = true;
                        self.pos += 1;
                        break;
                    }
                }
                _ => {
                    let attr = self.attribute();
                    if !attrs.iter().any(|a| a.name == attr.name) {
                        attrs.push(attr);
                    }
                }
            }
        }
        let span = (lt, self.pos);
        let raw = is_raw_text(&name) && !self_closing;
        self.out.push(Token::StartTag { name: name.clone(), attrs, self_closing, span });
        if raw {
            self.raw_text(&name);
        }
    }

    fn attribute(&mut self) -> Attribute {
        let start = self.pos;
        // the first character may be '=' in tag soup; consume it as part of the name
        self.pos += 1;
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() || b == b'/' || b == b'>' || b == b'=' {
                break;
            }
            self.pos += 1;
        }
        let name = self.src[start..self.pos].to_ascii_lowercase();
        let save = self.pos;
        self.skip_ws();
        if self.bytes.get(self.pos) != Some(&b'=') {
            self.pos = save;
            return Attribute { name, value: String::new(), span: (start, save) };
        }
        self.pos += 1;
        self.skip_ws();
        let value = match self.bytes.get(self.pos) {
            Some(&q) if q == b'"' || q == b'\'' => {
                let vstart = self.pos + 1;
                let vend = match self.bytes[vstart..].iter().position(|&b| b == q) {
                    Some(i) => vstart + i,
                    None => self.bytes.len(),
                };
                self.pos = (vend + 1).min(self.bytes.len());
                decode_entities(&self.src[vstart..vend]).into_owned()
            }
            _ => {
                let vstart = self.pos;
                while self.pos < self.bytes.len() {
                    let b = self.bytes[self.pos];
                    if b.is_ascii_whitespace() || b == b'>' {
                        break;
                    }
                    self.pos += 1;
                }
                decode_entities(&self.src[vstart..self.pos]).into_owned()
            }
        };
        Attribute { name, value, span: (start, self.pos) }
    }

    fn raw_text(&mut self, name: &str) {
        let start = self.pos;
        let mut search = start;
        let end = loop {
            let Some(i) = find_ci(&self.bytes[search..], b"</") else {
                break self.bytes.len();
            };
            let at = search + i;
            let after = at + 2;
            let candidate = &self.bytes[after..(after + name.len()).min(self.bytes.len())];
            if candidate.eq_ignore_ascii_case(name.as_bytes()) {
                let term = self.bytes.get(after + name.len()).copied();
                if matches!(term, None | Some(b'>') | Some(b'/'))
                    || term.is_some_and(|b| b.is_ascii_whitespace())
                {
                    break at;
                }
            }
            search = at + 2;
        };
        if end > start {
            self.out.push(Token::RawText { span: (start, end) });
        }
        self.pos = end;
    }
}

fn find_ci(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w.eq_ignore_ascii_case(needle))
}

/// Decode character references. Unknown named references are left as is.
pub fn decode_entities(s: &str) -> Cow<'_, str> {
    if !s.contains('&') {
        return Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        match decode_one(rest) {
            Some((c, used)) => {
                out.push_str(c.as_ref());
                rest = &rest[used..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    Cow::Owned(out)
}

fn decode_one(s: &str) -> Option<(Cow<'static, str>, usize)> {
    let body = &s[1..];
    if let Some(num) = body.strip_prefix('#') {
        let (digits, radix, prefix) = match num.strip_prefix(['x', 'X']) {
            Some(hex) => (hex, 16, 2),
            None => (num, 10, 1),
        };
        let len = digits.chars().take_while(|c| c.is_digit(radix)).count();
        if len == 0 {
            return None;
        }
        let code = u32::from_str_radix(&digits[..len.min(8)], radix).unwrap_or(0xFFFD);
        let c = match code {
            0 => '\u{FFFD}',
            c => char::from_u32(c).unwrap_or('\u{FFFD}'),
        };
        let mut used = 1 + prefix + len;
        if s.as_bytes().get(used) == Some(&b';') {
            used += 1;
        }
        return Some((Cow::Owned(c.to_string()), used));
    }
    let len = body.chars().take_while(|c| c.is_ascii_alphanumeric()).count();
    if len == 0 {
        return None;
    }
    let name = &body[..len];
    let has_semi = body.as_bytes().get(len) == Some(&b';');
    let value = named_entity(name)?;
    // legacy references without a trailing semicolon are only honoured for the classic five
    if !has_semi && !matches!(name, "amp" | "lt" | "gt" | "quot" | "nbsp" | "copy" | "reg") {
        return None;
    }
    Some((Cow::Borrowed(value), 1 + len + usize::from(has_semi)))
}

fn named_entity(name: &str) -> Option<&'static str> {
    Some(match name {
        "amp" => "&",
        "lt" => "<",
        "gt" => ">",
        "quot" => "\"",
        "apos" => "'",
        "nbsp" => "\u{a0}",
        "copy" => "©",
        "reg" => "®",
        "trade" => "™",
        "hellip" => "…",
        "mdash" => "—",
        "ndash" => "–",
        "laquo" => "«",
        "raquo" => "»",
        "lsquo" => "‘",
        "rsquo" => "’",
        "ldquo" => "“",
        "rdquo" => "”",
        "bull" => "•",
        "middot" => "·",
        "euro" => "€",
        "pound" => "£",
        "yen" => "¥",
        "cent" => "¢",
        "sect" => "§",
        "deg" => "°",
        "times" => "×",
        "eacute" => "é",
        "egrave" => "è",
        "aacute" => "á",
        "agrave" => "à",
        "iacute" => "í",
        "oacute" => "ó",
        "uacute" => "ú",
        "ntilde" => "ñ",
        "uuml" => "ü",
        "ouml" => "ö",
        "auml" => "ä",
        "szlig" => "ß",
        "ccedil" => "ç",
        _ => return None,
    })
}

/// Escape text for inclusion in element content.
pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

/// Escape text for a double-quoted attribute value.
pub fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Child {
    Element(usize),
    Text(Span),
    RawText(Span),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub attrs: Vec<Attribute>,
    /// From the `<` of the start tag to the end of the closing tag (or the
    /// point where the element was implicitly closed).
    pub span: Span,
    pub start_tag: Span,
    pub parent: Option<usize>,
    pub children: Vec<Child>,
}

impl Node {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|a| a.name == name).map(|a| a.value.as_str())
    }

    pub fn has_attr(&self, name: &str) -> bool {
        self.attrs.iter().any(|a| a.name == name)
    }
}

/// Arena-backed document tree. Node 0 is the synthetic document root.
#[derive(Debug, Clone)]
pub struct Dom {
    pub nodes: Vec<Node>,
}

// Elements whose start tag implicitly closes an open `p`.
const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "center", "details", "dialog", "dir", "div", "dl",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hgroup", "hr", "li", "main", "menu", "nav", "ol", "p", "pre", "section", "table",
    "ul",
];

const SCOPE_BOUNDARY: &[&str] = &[
    "applet", "caption", "html", "table", "td", "th", "marquee", "object", "template", "button",
];

impl Dom {
    pub fn parse(src: &str) -> Dom {
        let mut nodes = vec![Node {
            name: "#document".into(),
            attrs: Vec::new(),
            span: (0, src.len()),
            start_tag: (0, 0),
            parent: None,
            children: Vec::new(),
        }];
        let mut stack: Vec<usize> = vec![0];
        let mut in_form = false;

        for tok in tokenize(src) {
            match tok {
                Token::StartTag { name, attrs, self_closing, span } => {
                    Self::implicit_close(&mut nodes, &mut stack, &name, span.0);
                    if name == "form" {
                        if in_form {
                            continue;
                        }
                        in_form = true;
                    }
                    let parent = *stack.last().unwrap();
                    let idx = nodes.len();
                    nodes.push(Node {
                        name: name.clone(),
                        attrs,
                        span,
                        start_tag: span,
                        parent: Some(parent),
                        children: Vec::new(),
                    });
                    nodes[parent].children.push(Child::Element(idx));
                    let raw = is_raw_text(&name) && !self_closing;
                    if !is_void(&name) && (raw || !self_closing) {
                        stack.push(idx);
                    }
                }
                Token::EndTag { name, span } => {
                    if matches!(name.as_str(), "body" | "html" | "head") {
                        continue;
                    }
                    let Some(pos) = stack.iter().rposition(|&i| nodes[i].name == name) else {
                        continue;
                    };
                    if pos == 0 {
                        continue;
                    }
                    while stack.len() > pos {
                        let i = stack.pop().unwrap();
                        nodes[i].span.1 = if stack.len() == pos { span.1 } else { span.0 };
                        if nodes[i].name == "form" {
                            in_form = false;
                        }
                    }
                }
                Token::Text { span } => {
                    let parent = *stack.last().unwrap();
                    nodes[parent].children.push(Child::Text(span));
                }
                Token::RawText { span } => {
                    let parent = *stack.last().unwrap();
                    nodes[parent].children.push(Child::RawText(span));
                }
                Token::Comment { .. } | Token::Doctype { .. } => {}
            }
        }
        while stack.len() > 1 {
            let i = stack.pop().unwrap();
            nodes[i].span.1 = src.len();
        }
        Dom { nodes }
    }

    fn in_scope(nodes: &[Node], stack: &[usize], target: &str, extra: &[&str]) -> Option<usize> {
        for (pos, &i) in stack.iter().enumerate().rev() {
            let n = &nodes[i].name;
            if n == target {
                return Some(pos);
            }
            if SCOPE_BOUNDARY.contains(&n.as_str()) || extra.contains(&n.as_str()) {
                return None;
            }
        }
        None
    }

    fn close_to(nodes: &mut [Node], stack: &mut Vec<usize>, pos: usize, at: usize) {
        while stack.len() > pos {
            let i = stack.pop().unwrap();
            nodes[i].span.1 = at;
        }
    }

    fn implicit_close(nodes: &mut [Node], stack: &mut Vec<usize>, name: &str, at: usize) {
        if CLOSES_P.contains(&name) {
            if let Some(pos) = Self::in_scope(nodes, stack, "p", &[]) {
                Self::close_to(nodes, stack, pos, at);
            }
        }
        match name {
            "li" => {
                if let Some(pos) = Self::in_scope(nodes, stack, "li", &["ol", "ul"]) {
                    Self::close_to(nodes, stack, pos, at);
                }
            }
            "a" => {
                if let Some(pos) = Self::in_scope(nodes, stack, "a", &[]) {
                    Self::close_to(nodes, stack, pos, at);
                }
            }
            "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => {
                if let Some(&top) = stack.last() {
                    if matches!(nodes[top].name.as_str(), "h1" | "h2" | "h3" | "h4" | "h5" | "h6") {
                        let pos = stack.len() - 1;
                        Self::close_to(nodes, stack, pos, at);
                    }
                }
            }
            _ => {}
        }
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Element indices in document order (pre-order), excluding the root.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i != 0 {
                out.push(i);
            }
            for c in self.nodes[i].children.iter().rev() {
                if let Child::Element(e) = c {
                    stack.push(*e);
                }
            }
        }
        out
    }

    pub fn ancestors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(self.nodes[idx].parent, move |&p| self.nodes[p].parent)
            .filter(|&p| p != 0)
    }

    /// Content span of a raw-text element's body, if any.
    pub fn raw_body(&self, idx: usize) -> Option<Span> {
        self.nodes[idx].children.iter().find_map(|c| match c {
            Child::RawText(s) => Some(*s),
            _ => None,
        })
    }

    pub fn find_all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.preorder().into_iter().filter(move |&i| self.nodes[i].name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(dom: &Dom) -> Vec<String> {
        dom.preorder().into_iter().map(|i| dom.nodes[i].name.clone()).collect()
    }

    #[test]
    fn lexes_attributes_in_all_quote_styles() {
        let toks = tokenize(r#"<a href="/x" data-y='1' z=2 hidden>t</a>"#);
        let Token::StartTag { name, attrs, .. } = &toks[0] else { panic!() };
        assert_eq!(name, "a");
        let pairs: Vec<_> = attrs.iter().map(|a| (a.name.as_str(), a.value.as_str())).collect();
        assert_eq!(pairs, vec![("href", "/x"), ("data-y", "1"), ("z", "2"), ("hidden", "")]);
    }

    #[test]
    fn script_body_is_raw() {
        let src = "<script>if (a < b) { x = '</div>'; }</script><p>x</p>";
        let dom = Dom::parse(src);
        let script = dom.find_all("script").next().unwrap();
        let body = dom.raw_body(script).unwrap();
        assert_eq!(&src[body.0..body.1], "if (a < b) { x = '</div>'; }");
        assert_eq!(names(&dom), vec!["script", "p"]);
    }

    #[test]
    fn implicit_p_and_li_closing() {
        let dom = Dom::parse("<p>one<p>two<ul><li>a<li>b</ul>");
        assert_eq!(names(&dom), vec!["p", "p", "ul", "li", "li"]);
        let ul = dom.find_all("ul").next().unwrap();
        // second p was closed by ul, so ul is a sibling
        assert_eq!(dom.nodes[ul].parent, Some(0));
    }

    #[test]
    fn unclosed_elements_close_at_eof_with_spans() {
        let src = "<div><form action=x><input name=a>";
        let dom = Dom::parse(src);
        let form = dom.find_all("form").next().unwrap();
        assert_eq!(dom.nodes[form].span, (5, src.len()));
        let input = dom.find_all("input").next().unwrap();
        assert_eq!(dom.nodes[input].parent, Some(form));
    }

    #[test]
    fn stray_end_tags_are_ignored() {
        let dom = Dom::parse("</span><h1>T</h1></b>");
        assert_eq!(names(&dom), vec!["h1"]);
    }

    #[test]
    fn entities_decode() {
        assert_eq!(decode_entities("a &amp; b &#65;&#x42; &copy &bogus;"), "a & b AB © &bogus;");
    }

    #[test]
    fn comments_do_not_produce_elements() {
        let dom = Dom::parse("<!-- <a href=x>no</a> --><a>yes</a>");
        assert_eq!(names(&dom), vec!["a"]);
    }
}
