//! Canonicalisation of raw page bytes to UTF-8.
//!
//! Two things happen here: the byte stream is transcoded according to its
//! BOM or `<meta charset>` declaration, and inline scripts whose entire body
//! is a decode-and-execute wrapper (`eval(atob("..."))` and friends) are
//! replaced by the decoded script text.

use std::sync::LazyLock;

use base64::alphabet;
use base64::engine::{DecodePaddingMode, GeneralPurpose, GeneralPurposeConfig};
use base64::Engine;
use encoding_rs::{Encoding, UTF_16BE, UTF_16LE, UTF_8};
use regex::bytes::Regex as BytesRegex;
use serde::{Deserialize, Serialize};

use crate::html::Dom;

const PRESCAN_LIMIT: usize = 4096;
const MAX_UNWRAP_DEPTH: usize = 8;

static META_CHARSET: LazyLock<BytesRegex> = LazyLock::new(|| {
    BytesRegex::new(r#"(?i)<meta\b[^>]*?charset\s*=\s*["']?\s*([a-z0-9_\-:.]+)"#).unwrap()
});

static LENIENT_B64: LazyLock<GeneralPurpose> = LazyLock::new(|| {
    GeneralPurpose::new(
        &alphabet::STANDARD,
        GeneralPurposeConfig::new()
            .with_decode_padding_mode(DecodePaddingMode::Indifferent)
            .with_decode_allow_trailing_bits(true),
    )
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharsetReport {
    /// Label found in a `<meta>` declaration, verbatim.
    pub declared: Option<String>,
    /// Encoding actually used for decoding.
    pub used: String,
    pub bom: bool,
    /// Declaration and byte content disagree.
    pub mismatch: bool,
    /// Byte span of the declared label in the input.
    pub declared_span: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub charset: CharsetReport,
    pub decoded_scripts: usize,
    pub notes: Vec<String>,
}

/// Transcode to canonical UTF-8 and unwrap decode-and-execute script
/// wrappers. Total: never fails, and `f(f(x)) == f(x)`.
pub fn normalize_encodings(bytes: &[u8]) -> String {
    normalize_encodings_traced(bytes).text
}

pub fn normalize_encodings_traced(bytes: &[u8]) -> Normalized {
    let mut notes = Vec::new();
    let (mut text, charset) = transcode(bytes, &mut notes);
    let decoded_scripts = unwrap_scripts(&mut text, &mut notes);
    Normalized { text, charset, decoded_scripts, notes }
}

/// Inspect the charset situation of a byte stream without decoding it.
pub fn sniff_charset(bytes: &[u8]) -> CharsetReport {
    let mut notes = Vec::new();
    transcode(bytes, &mut notes).1
}

fn transcode(bytes: &[u8], notes: &mut Vec<String>) -> (String, CharsetReport) {
    if let Some((enc, bom_len)) = Encoding::for_bom(bytes) {
        let (text, had_errors) = enc.decode_without_bom_handling(&bytes[bom_len..]);
        if had_errors {
            notes.push(format!("invalid {} sequences replaced", enc.name()));
        }
        let mut report = CharsetReport {
            declared: None,
            used: enc.name().to_string(),
            bom: true,
            mismatch: false,
            declared_span: None,
        };
        let mut text = text.into_owned();
        // a BOM overrides any declaration; make the declaration agree with the output
        if let Some((label, span)) = declared_label(text.as_bytes()) {
            report.declared = Some(label.clone());
            if !is_utf8_label(&label) {
                text.replace_range(span.0..span.1, "utf-8");
            }
        }
        return (text, report);
    }

    let declared = declared_label(bytes);
    let strict_utf8 = std::str::from_utf8(bytes).ok();
    let mut report = CharsetReport {
        declared: declared.as_ref().map(|d| d.0.clone()),
        used: UTF_8.name().to_string(),
        bom: false,
        mismatch: false,
        declared_span: declared.as_ref().map(|d| d.1),
    };

    let declared_enc = declared.as_ref().and_then(|(label, _)| {
        let enc = Encoding::for_label(label.as_bytes());
        if enc.is_none() {
            notes.push(format!("unknown charset label {label:?}; decoding as UTF-8"));
        }
        enc
    });
    // a meta declaration of UTF-16 means UTF-8 for an ASCII-compatible byte stream
    let declared_enc = declared_enc.map(|e| if e == UTF_16LE || e == UTF_16BE { UTF_8 } else { e });

    let text = match (declared_enc, strict_utf8) {
        (Some(enc), Some(valid)) if enc != UTF_8 && !valid.is_ascii() => {
            report.mismatch = true;
            notes.push(format!("declared {} but content is UTF-8", enc.name()));
            valid.to_string()
        }
        (Some(enc), _) if enc != UTF_8 => {
            report.used = enc.name().to_string();
            let (text, had_errors) = enc.decode_without_bom_handling(bytes);
            if had_errors {
                notes.push(format!("invalid {} sequences replaced", enc.name()));
            }
            text.into_owned()
        }
        (_, Some(valid)) => valid.to_string(),
        (enc, None) => {
            if enc == Some(UTF_8) {
                report.mismatch = true;
            }
            notes.push("invalid UTF-8 sequences replaced".to_string());
            String::from_utf8_lossy(bytes).into_owned()
        }
    };

    let mut text = text;
    if let Some((label, _)) = &declared {
        if declared_enc.is_some() && !is_utf8_label(label) {
            // the label position moves once bytes are transcoded, so find it again
            if let Some((_, span)) = declared_label(text.as_bytes()) {
                text.replace_range(span.0..span.1, "utf-8");
            }
        }
    }
    (text, report)
}

fn is_utf8_label(label: &str) -> bool {
    label.eq_ignore_ascii_case("utf-8") || label.eq_ignore_ascii_case("utf8")
}

fn declared_label(bytes: &[u8]) -> Option<(String, (usize, usize))> {
    let window = &bytes[..bytes.len().min(PRESCAN_LIMIT)];
    let caps = META_CHARSET.captures(window)?;
    let m = caps.get(1)?;
    Some((String::from_utf8_lossy(m.as_bytes()).into_owned(), (m.start(), m.end())))
}

fn unwrap_scripts(text: &mut String, notes: &mut Vec<String>) -> usize {
    let dom = Dom::parse(text);
    let mut edits: Vec<((usize, usize), String)> = Vec::new();
    for idx in dom.find_all("script") {
        if dom.nodes[idx].has_attr("src") {
            continue;
        }
        let Some(span) = dom.raw_body(idx) else { continue };
        match decode_script_wrapper(&text[span.0..span.1]) {
            WrapperOutcome::Decoded { text: decoded, .. } => edits.push((span, decoded)),
            WrapperOutcome::Undecodable(reason) => {
                notes.push(format!("script at byte {} left verbatim: {reason}", span.0))
            }
            WrapperOutcome::NotAWrapper => {}
        }
    }
    let n = edits.len();
    for ((start, end), replacement) in edits.into_iter().rev() {
        text.replace_range(start..end, &replacement);
    }
    n
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WrapperOutcome {
    NotAWrapper,
    Decoded { text: String, depth: usize },
    Undecodable(String),
}

/// Recognise a script body that is nothing but a decode-and-execute wrapper
/// around a string literal, and decode it (recursively, when the payload is
/// itself such a wrapper).
pub fn decode_script_wrapper(body: &str) -> WrapperOutcome {
    let mut current = body.to_string();
    let mut depth = 0;
    for _ in 0..MAX_UNWRAP_DEPTH {
        let Some(call) = parse_exec_wrapper(&current) else { break };
        match call.evaluate() {
            Ok(decoded) => {
                if let Err(why) = check_script_text(&decoded) {
                    return if depth == 0 {
                        WrapperOutcome::Undecodable(why)
                    } else {
                        WrapperOutcome::Decoded { text: current, depth }
                    };
                }
                depth += call.decoders.len();
                current = decoded;
            }
            Err(why) => {
                return if depth == 0 {
                    WrapperOutcome::Undecodable(why)
                } else {
                    WrapperOutcome::Decoded { text: current, depth }
                };
            }
        }
    }
    if depth == 0 {
        WrapperOutcome::NotAWrapper
    } else {
        WrapperOutcome::Decoded { text: current, depth }
    }
}

/// Number of nested decoder calls found anywhere in `script`, following
/// decoded payloads. Used by the evasion profiler.
pub fn max_decode_depth(script: &str) -> usize {
    let mut best = 0;
    let bytes = script.as_bytes();
    for (i, _) in script.match_indices(|c: char| c.is_ascii_alphabetic()) {
        if i > 0 && (bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_') {
            continue;
        }
        let mut p = JsCursor { s: script, pos: i };
        if let Some(expr) = p.decode_expr() {
            if expr.decoders.is_empty() {
                continue;
            }
            let mut depth = expr.decoders.len();
            if let Ok(decoded) = expr.evaluate() {
                if let WrapperOutcome::Decoded { depth: inner, .. } = decode_script_wrapper(&decoded) {
                    depth += inner;
                } else {
                    depth += max_decode_depth_shallow(&decoded);
                }
            }
            best = best.max(depth);
        }
    }
    best
}

fn max_decode_depth_shallow(script: &str) -> usize {
    let bytes = script.as_bytes();
    let mut best = 0;
    for (i, _) in script.match_indices(|c: char| c.is_ascii_alphabetic()) {
        if i > 0 && (bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_') {
            continue;
        }
        let mut p = JsCursor { s: script, pos: i };
        if let Some(expr) = p.decode_expr() {
            best = best.max(expr.decoders.len());
        }
    }
    best
}

fn check_script_text(s: &str) -> Result<(), String> {
    if s.trim().is_empty() {
        return Err("decoded payload is empty".into());
    }
    if s.chars().any(|c| c.is_control() && !matches!(c, '\t' | '\n' | '\r' | '\u{c}')) {
        return Err("decoded payload is not script text".into());
    }
    if s.to_ascii_lowercase().contains("</script") {
        return Err("decoded payload would terminate the script element".into());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoder {
    Atob,
    Unescape,
    Escape,
    DecodeUriComponent,
    DecodeUri,
}

impl Decoder {
    fn from_ident(s: &str) -> Option<Decoder> {
        Some(match s {
            "atob" => Decoder::Atob,
            "unescape" => Decoder::Unescape,
            "escape" => Decoder::Escape,
            "decodeURIComponent" => Decoder::DecodeUriComponent,
            "decodeURI" => Decoder::DecodeUri,
            _ => return None,
        })
    }

    fn apply(self, input: &str) -> Result<String, String> {
        match self {
            Decoder::Atob => {
                let compact: String = input.chars().filter(|c| !c.is_ascii_whitespace()).collect();
                let bytes = LENIENT_B64.decode(compact.as_bytes()).map_err(|e| format!("atob: {e}"))?;
                // atob yields a binary string: one char per byte
                Ok(bytes.into_iter().map(char::from).collect())
            }
            Decoder::Unescape => Ok(js_unescape(input)),
            Decoder::Escape => Ok(js_escape(input)),
            Decoder::DecodeUriComponent | Decoder::DecodeUri => percent_decode_utf8(input),
        }
    }
}

/// A chain of decoder calls applied to a string literal, outermost first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeExpr {
    pub decoders: Vec<Decoder>,
    pub literal: String,
}

impl DecodeExpr {
    pub fn evaluate(&self) -> Result<String, String> {
        let mut value = self.literal.clone();
        for d in self.decoders.iter().rev() {
            value = d.apply(&value)?;
        }
        // a binary string from atob is re-read as UTF-8 when that is what it holds
        if self.decoders.first() == Some(&Decoder::Atob) && value.chars().all(|c| (c as u32) < 256) {
            let bytes: Vec<u8> = value.chars().map(|c| c as u8).collect();
            return String::from_utf8(bytes).map_err(|_| "atob payload is not UTF-8".to_string());
        }
        Ok(value)
    }
}

fn parse_exec_wrapper(body: &str) -> Option<DecodeExpr> {
    let mut p = JsCursor { s: body, pos: 0 };
    p.ws();
    let expr = if p.eat_ident_path(&["eval"]) {
        p.expect('(')?;
        let e = p.decode_expr()?;
        p.expect(')')?;
        e
    } else {
        p.eat_keyword("new");
        if !p.eat_ident_path(&["Function"]) {
            return None;
        }
        p.expect('(')?;
        let e = p.decode_expr()?;
        p.expect(')')?;
        p.expect('(')?;
        p.expect(')')?;
        e
    };
    p.ws();
    if p.peek() == Some(';') {
        p.pos += 1;
    }
    p.ws();
    if p.pos != body.len() || expr.decoders.is_empty() {
        return None;
    }
    Some(expr)
}

struct JsCursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> JsCursor<'a> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, c: char) -> Option<()> {
        self.ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Some(())
        } else {
            None
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                self.pos += 1;
            } else {
                break;
            }
        }
        (self.pos > start).then(|| &self.s[start..self.pos])
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        let save = self.pos;
        if self.ident() == Some(kw) {
            true
        } else {
            self.pos = save;
            false
        }
    }

    /// Accept `name`, `window.name` or `self.name` for any of `names`.
    fn eat_ident_path(&mut self, names: &[&str]) -> bool {
        let save = self.pos;
        let Some(first) = self.ident() else {
            self.pos = save;
            return false;
        };
        let name = if matches!(first, "window" | "self" | "globalThis") {
            if self.expect('.').is_none() {
                self.pos = save;
                return false;
            }
            match self.ident() {
                Some(n) => n,
                None => {
                    self.pos = save;
                    return false;
                }
            }
        } else {
            first
        };
        if names.contains(&name) {
            true
        } else {
            self.pos = save;
            false
        }
    }

    fn decode_expr(&mut self) -> Option<DecodeExpr> {
        self.ws();
        if let Some(q) = self.peek().filter(|c| matches!(c, '"' | '\'' | '`')) {
            let literal = self.string_literal(q)?;
            return Some(DecodeExpr { decoders: Vec::new(), literal });
        }
        let save = self.pos;
        let mut name = self.ident()?;
        if matches!(name, "window" | "self" | "globalThis") {
            if self.expect('.').is_none() {
                self.pos = save;
                return None;
            }
            name = self.ident()?;
        }
        let Some(dec) = Decoder::from_ident(name) else {
            self.pos = save;
            return None;
        };
        self.expect('(')?;
        let mut inner = self.decode_expr()?;
        self.expect(')')?;
        inner.decoders.insert(0, dec);
        Some(inner)
    }

    fn string_literal(&mut self, quote: char) -> Option<String> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            let c = self.peek()?;
            self.pos += c.len_utf8();
            if c == quote {
                return Some(out);
            }
            if quote == '`' && c == '$' && self.peek() == Some('{') {
                return None;
            }
            if c != '\\' {
                out.push(c);
                continue;
            }
            let e = self.peek()?;
            self.pos += e.len_utf8();
            match e {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                'b' => out.push('\u{8}'),
                'f' => out.push('\u{c}'),
                'v' => out.push('\u{b}'),
                '0' => out.push('\0'),
                'x' => {
                    let hex = self.s.get(self.pos..self.pos + 2)?;
                    out.push(char::from(u8::from_str_radix(hex, 16).ok()?));
                    self.pos += 2;
                }
                'u' => {
                    let hex = self.s.get(self.pos..self.pos + 4)?;
                    let cp = u32::from_str_radix(hex, 16).ok()?;
                    out.push(char::from_u32(cp).unwrap_or('\u{FFFD}'));
                    self.pos += 4;
                }
                '\n' => {}
                other => out.push(other),
            }
        }
    }
}

/// Parse a single JS string literal (quotes included). Used by the parser's
/// late-rebinding analysis and the adversarial restore simulation.
pub fn parse_js_string(lit: &str) -> Option<String> {
    let q = lit.chars().next().filter(|c| matches!(c, '"' | '\'' | '`'))?;
    let mut p = JsCursor { s: lit, pos: 0 };
    let s = p.string_literal(q)?;
    (p.pos == lit.len()).then_some(s)
}

/// Parse a decoder-call expression such as `atob('...')` or a bare literal.
pub fn parse_decode_expr(src: &str) -> Option<DecodeExpr> {
    let mut p = JsCursor { s: src, pos: 0 };
    let e = p.decode_expr()?;
    p.ws();
    (p.pos == src.len()).then_some(e)
}

fn js_unescape(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '%' {
            if chars.get(i + 1) == Some(&'u') {
                let hex: String = chars.iter().skip(i + 2).take(4).collect();
                if hex.len() == 4 {
                    if let Ok(cp) = u32::from_str_radix(&hex, 16) {
                        out.push(char::from_u32(cp).unwrap_or('\u{FFFD}'));
                        i += 6;
                        continue;
                    }
                }
            } else {
                let hex: String = chars.iter().skip(i + 1).take(2).collect();
                if hex.len() == 2 {
                    if let Ok(b) = u8::from_str_radix(&hex, 16) {
                        out.push(char::from(b));
                        i += 3;
                        continue;
                    }
                }
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn js_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || "@*_+-./".contains(c) {
            out.push(c);
        } else if (c as u32) < 256 {
            out.push_str(&format!("%{:02X}", c as u32));
        } else {
            let mut buf = [0u16; 2];
            for unit in c.encode_utf16(&mut buf) {
                out.push_str(&format!("%u{unit:04X}"));
            }
        }
    }
    out
}

fn percent_decode_utf8(s: &str) -> Result<String, String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s.get(i + 1..i + 3).ok_or("URIError: malformed escape")?;
            let b = u8::from_str_radix(hex, 16).map_err(|_| "URIError: malformed escape")?;
            out.push(b);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| "URIError: malformed UTF-8".to_string())
}

/// Standard Base64 encoding, as produced by `btoa` on UTF-8 bytes.
pub fn base64_encode(s: &str) -> String {
    base64::engine::general_purpose::STANDARD.encode(s.as_bytes())
}
