//! Tokenization and element-aligned sliding windows.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Phishing,
    Benign,
}

impl Label {
    pub fn is_phishing(self) -> bool {
        self == Label::Phishing
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Phishing => "phishing",
            Label::Benign => "benign",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Order index of the element (line) the token came from.
    pub element: usize,
}

const DELIMITERS: &[char] = &[':', '|', '=', ';', ',', '(', ')', '{', '}', '[', ']', '<', '>', '"', '\''];
const EMPTY: &str = "<EMPTY>";

/// Split parsed text into tokens on whitespace and single-character
/// delimiters. Non-blank line `i` is element `i`.
pub fn tokenize(parsed_text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for (element, line) in parsed_text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        for word in line.split_whitespace() {
            let mut rest = word;
            while !rest.is_empty() {
                if let Some(tail) = rest.strip_prefix(EMPTY) {
                    out.push(Token { text: EMPTY.to_string(), element });
                    rest = tail;
                    continue;
                }
                let first = rest.chars().next().unwrap();
                if DELIMITERS.contains(&first) {
                    out.push(Token { text: first.to_string(), element });
                    rest = &rest[first.len_utf8()..];
                    continue;
                }
                let end = rest
                    .char_indices()
                    .find(|&(i, c)| DELIMITERS.contains(&c) || rest[i..].starts_with(EMPTY))
                    .map_or(rest.len(), |(i, _)| i);
                out.push(Token { text: rest[..end].to_string(), element });
                rest = &rest[end..];
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub window: usize,
    pub stride: usize,
    pub merge_enabled: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { window: 512, stride: 256, merge_enabled: true }
    }
}

impl WindowConfig {
    pub fn new(window: usize, stride: usize) -> Result<Self, WindowError> {
        let cfg = WindowConfig { window, stride, merge_enabled: true };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.stride == 0 || self.stride > self.window {
            return Err(WindowError::InvalidConfig { window: self.window, stride: self.stride });
        }
        Ok(())
    }

    /// Nominal window count for `total` tokens: ceil((T - W) / S) + 1, or 1.
    pub fn nominal_count(&self, total: usize) -> usize {
        if total <= self.window {
            1
        } else {
            (total - self.window).div_ceil(self.stride) + 1
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("element {element} has {len} tokens, more than the window of {window}")]
    ElementTooLarge { element: usize, len: usize, window: usize },
    #[error("invalid window configuration: window={window}, stride={stride}")]
    InvalidConfig { window: usize, stride: usize },
    #[error("no tokens to window")]
    Empty,
    #[error("cannot merge {k} of {available} chunks")]
    InvalidMerge { k: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub tokens: Vec<String>,
    /// Element order index of each token.
    pub token_elements: Vec<usize>,
    /// Half-open range over the document token stream.
    pub token_span: (usize, usize),
    /// Inclusive range of element order indices.
    pub element_range: (usize, usize),
    pub label: Option<Label>,
    /// Set when the chunk contains a piece of a hard-split oversized element.
    pub split: bool,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by spaces with a newline between elements.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, (t, e)) in self.tokens.iter().zip(&self.token_elements).enumerate() {
            if i > 0 {
                out.push(if self.token_elements[i - 1] != *e { '\n' } else { ' ' });
            }
            out.push_str(t);
        }
        out
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }
}

/// Element start offsets plus `T`, in increasing order.
fn boundaries(tokens: &[Token]) -> Vec<usize> {
    let mut b = vec![0];
    for i in 1..tokens.len() {
        if tokens[i].element != tokens[i - 1].element {
            b.push(i);
        }
    }
    b.push(tokens.len());
    b
}

fn floor_snap(bounds: &[usize], pos: usize) -> usize {
    match bounds.binary_search(&pos) {
        Ok(i) => bounds[i],
        Err(i) => bounds[i - 1],
    }
}

fn check_elements(bounds: &[usize], tokens: &[Token], window: usize) -> Result<(), WindowError> {
    for pair in bounds.windows(2) {
        let len = pair[1] - pair[0];
        if len > window {
            return Err(WindowError::ElementTooLarge { element: tokens[pair[0]].element, len, window });
        }
    }
    Ok(())
}

/// Element-aligned sliding windows. Window `i` nominally spans
/// `[i*S, min(i*S + W, T))`; both ends are snapped back to element starts.
/// Windows that collapse onto an earlier one are dropped and gaps are
/// back-filled so every element is covered.
pub fn make_windows(tokens: &[Token], config: &WindowConfig) -> Result<Vec<Chunk>, WindowError> {
    config.validate()?;
    if tokens.is_empty() {
        return Err(WindowError::Empty);
    }
    let bounds = boundaries(tokens);
    check_elements(&bounds, tokens, config.window)?;
    Ok(windows_over(tokens, &bounds, config, &[]))
}

/// Like [`make_windows`], but elements longer than the window are cut at
/// W-token increments instead of failing; chunks holding a cut are flagged.
pub fn make_windows_or_split(tokens: &[Token], config: &WindowConfig) -> Result<Vec<Chunk>, WindowError> {
    config.validate()?;
    if tokens.is_empty() {
        return Err(WindowError::Empty);
    }
    let natural = boundaries(tokens);
    let mut bounds = Vec::with_capacity(natural.len());
    let mut cuts = Vec::new();
    for pair in natural.windows(2) {
        let mut p = pair[0];
        bounds.push(p);
        if pair[1] - pair[0] > config.window {
            cuts.push((pair[0], pair[1]));
            while pair[1] - p > config.window {
                p += config.window;
                bounds.push(p);
            }
        }
    }
    bounds.push(tokens.len());
    Ok(windows_over(tokens, &bounds, config, &cuts))
}

fn windows_over(tokens: &[Token], bounds: &[usize], config: &WindowConfig, cuts: &[(usize, usize)]) -> Vec<Chunk> {
    let total = tokens.len();
    let window_at = |start: usize| -> (usize, usize) { (start, floor_snap(bounds, (start + config.window).min(total))) };

    let mut spans: Vec<(usize, usize)> = Vec::new();
    for i in 0..config.nominal_count(total) {
        let span = window_at(floor_snap(bounds, i * config.stride));
        if !spans.contains(&span) {
            spans.push(span);
        }
    }
    // back-fill anything the snapped windows missed
    spans.sort_unstable();
    let mut filled = Vec::with_capacity(spans.len());
    let mut covered = 0;
    for span in spans {
        while covered < span.0 {
            let fill = window_at(covered);
            filled.push(fill);
            covered = fill.1;
        }
        covered = covered.max(span.1);
        filled.push(span);
    }
    while covered < total {
        let fill = window_at(covered);
        filled.push(fill);
        covered = fill.1;
    }
    filled.sort_unstable();
    filled.dedup();

    filled
        .into_iter()
        .map(|(s, e)| Chunk {
            tokens: tokens[s..e].iter().map(|t| t.text.clone()).collect(),
            token_elements: tokens[s..e].iter().map(|t| t.element).collect(),
            token_span: (s, e),
            element_range: (tokens[s].element, tokens[e - 1].element),
            label: None,
            split: cuts.iter().any(|&(cs, ce)| s < ce && cs < e),
        })
        .collect()
}

/// Merge the first `k` chunks, keeping each document token index once.
pub fn merge_chunks(chunks: &[Chunk], k: usize) -> Result<Chunk, WindowError> {
    if k < 2 || k > chunks.len() {
        return Err(WindowError::InvalidMerge { k, available: chunks.len() });
    }
    let mut by_index: BTreeMap<usize, (&str, usize)> = BTreeMap::new();
    for c in &chunks[..k] {
        for (off, (t, e)) in c.tokens.iter().zip(&c.token_elements).enumerate() {
            by_index.entry(c.token_span.0 + off).or_insert((t.as_str(), *e));
        }
    }
    let start = chunks[..k].iter().map(|c| c.token_span.0).min().unwrap_or(0);
    let end = chunks[..k].iter().map(|c| c.token_span.1).max().unwrap_or(0);
    let first_el = chunks[..k].iter().map(|c| c.element_range.0).min().unwrap_or(0);
    let last_el = chunks[..k].iter().map(|c| c.element_range.1).max().unwrap_or(0);
    Ok(Chunk {
        tokens: by_index.values().map(|(t, _)| t.to_string()).collect(),
        token_elements: by_index.values().map(|(_, e)| *e).collect(),
        token_span: (start, end),
        element_range: (first_el, last_el),
        label: chunks[0].label,
        split: chunks[..k].iter().any(|c| c.split),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub doc: String,
    pub token_span: (usize, usize),
    pub element_range: (usize, usize),
    pub token_count: usize,
    pub label: Option<Label>,
    pub split: bool,
    pub text: String,
}

impl ChunkRecord {
    pub fn new(doc: &str, chunk: &Chunk) -> Self {
        ChunkRecord {
            doc: doc.to_string(),
            token_span: chunk.token_span,
            element_range: chunk.element_range,
            token_count: chunk.len(),
            label: chunk.label,
            split: chunk.split,
            text: chunk.text(),
        }
    }
}

/// One JSON record per chunk.
pub fn chunk_dump(doc: &str, chunks: &[Chunk]) -> String {
    let mut out = String::new();
    for c in chunks {
        out.push_str(&serde_json::to_string(&ChunkRecord::new(doc, c)).expect("chunk record serialises"));
        out.push('\n');
    }
    out
}

/// Deterministic shuffled split; `train_fraction` of the items (rounded)
/// go to the first set.
pub fn split_train_test<T: Clone>(items: &[T], train_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((items.len() as f64) * train_fraction.clamp(0.0, 1.0)).round() as usize;
    let train = idx[..n_train].iter().map(|&i| items[i].clone()).collect();
    let test = idx[n_train..].iter().map(|&i| items[i].clone()).collect();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(lengths: &[usize]) -> Vec<Token> {
        let mut out = Vec::new();
        for (e, &n) in lengths.iter().enumerate() {
            for j in 0..n {
                out.push(Token { text: format!("t{e}_{j}"), element: e });
            }
        }
        out
    }

    #[test]
    fn tokenizer_grammar_example() {
        let t: Vec<_> = tokenize("a: sign in | href=/l").into_iter().map(|t| t.text).collect();
        assert_eq!(t, vec!["a", ":", "sign", "in", "|", "href", "=", "/l"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn empty_marker_is_one_token() {
        let t: Vec<_> = tokenize("a: <EMPTY> | href=#").into_iter().map(|t| t.text).collect();
        assert_eq!(t, vec!["a", ":", "<EMPTY>", "|", "href", "=", "#"]);
    }

    #[test]
    fn attribution_partitions_lines() {
        let text = "p: hello world\na: go | href=/x";
        let toks = tokenize(text);
        // oracle: rejoining each element's group reproduces its line modulo whitespace
        for (i, line) in text.lines().enumerate() {
            let joined: String = toks.iter().filter(|t| t.element == i).map(|t| t.text.as_str()).collect();
            let stripped: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            assert_eq!(joined, stripped);
        }
        let firsts: Vec<_> = toks.iter().map(|t| t.element).collect();
        assert!(firsts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn aligned_fifty_token_elements() {
        let toks = synthetic(&[50; 20]);
        let chunks = make_windows(&toks, &WindowConfig::default()).unwrap();
        let starts: Vec<_> = chunks.iter().map(|c| c.token_span.0).collect();
        assert_eq!(starts, vec![0, 250, 500]);
        assert_eq!(chunks.len(), (1000usize - 512).div_ceil(256) + 1);
        assert_eq!(chunks[2].token_span.1, 1000);
    }

    #[test]
    fn short_document_is_one_chunk() {
        let toks = synthetic(&[100, 100, 100]);
        let chunks = make_windows(&toks, &WindowConfig::default()).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].token_span, (0, 300));
        assert_eq!(chunks[0].element_range, (0, 2));
    }

    #[test]
    fn oversize_element_errors_or_splits() {
        let toks = synthetic(&[600]);
        assert!(matches!(
            make_windows(&toks, &WindowConfig::default()),
            Err(WindowError::ElementTooLarge { len: 600, .. })
        ));
        let chunks = make_windows_or_split(&toks, &WindowConfig::default()).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].token_span, (0, 512));
        assert_eq!(chunks[1].token_span, (512, 600));
        assert!(chunks.iter().all(|c| c.split));
    }

    #[test]
    fn merge_dedups_overlap() {
        let toks = synthetic(&[5; 3]);
        let cfg = WindowConfig { window: 10, stride: 5, merge_enabled: true };
        let chunks = make_windows(&toks, &cfg).unwrap();
        assert_eq!(chunks.len(), 2);
        let m = merge_chunks(&chunks, 2).unwrap();
        assert_eq!(m.len(), 10 + 10 - 5);
        assert_eq!(m.token_span, (0, 15));
        assert!(merge_chunks(&chunks, 1).is_err());
    }

    #[test]
    fn merge_of_disjoint_chunks() {
        let toks = synthetic(&[10, 10]);
        let cfg = WindowConfig { window: 10, stride: 10, merge_enabled: true };
        let chunks = make_windows(&toks, &cfg).unwrap();
        assert_eq!(merge_chunks(&chunks, 2).unwrap().len(), 20);
    }

    #[test]
    fn chunk_text_breaks_lines_between_elements() {
        let toks = tokenize("p: a b\nh1: c");
        let c = &make_windows(&toks, &WindowConfig::default()).unwrap()[0];
        assert_eq!(c.text(), "p : a b\nh1 : c");
    }

    #[test]
    fn seeded_split_is_deterministic() {
        let items: Vec<u32> = (0..100).collect();
        let (a, b) = split_train_test(&items, 0.7, 9);
        assert_eq!(a.len(), 70);
        assert_eq!(b.len(), 30);
        assert_eq!(split_train_test(&items, 0.7, 9), (a, b));
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(WindowConfig::new(10, 0).is_err());
        assert!(WindowConfig::new(10, 11).is_err());
    }

    proptest! {
        #[test]
        fn coverage_bound_and_monotone_merge(
            lengths in prop::collection::vec(1usize..40, 1..60),
            window in 40usize..200,
            stride_frac in 0.1f64..1.0,
        ) {
            let stride = ((window as f64 * stride_frac) as usize).max(1);
            let cfg = WindowConfig { window, stride, merge_enabled: true };
            let toks = synthetic(&lengths);
            let chunks = make_windows(&toks, &cfg).unwrap();
            let mut seen = vec![false; lengths.len()];
            for c in &chunks {
                prop_assert!(c.len() <= window);
                for e in c.element_range.0..=c.element_range.1 {
                    seen[e] = true;
                }
            }
            prop_assert!(seen.iter().all(|s| *s));
            if lengths.iter().all(|&l| l <= stride) {
                prop_assert!(chunks.len() >= cfg.nominal_count(toks.len()));
            }
            for k in 2..chunks.len() {
                let a = merge_chunks(&chunks, k).unwrap();
                let b = merge_chunks(&chunks, k + 1).unwrap();
                prop_assert!(a.token_span.0 >= b.token_span.0 && a.token_span.1 <= b.token_span.1);
            }
        }
    }
}
