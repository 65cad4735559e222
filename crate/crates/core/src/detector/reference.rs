//! Hashed uni/bigram logistic regression trained with seeded SGD.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DetectorError, Scorer, ScorerError};
use crate::window::{Chunk, Label};

pub const DEFAULT_DIM: usize = 1 << 18;
const MAGIC: &str = "phishscan-reference-model";
const FORMAT_VERSION: u32 = 1;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn unigram_key(t: &str) -> Vec<u8> {
    let mut k = Vec::with_capacity(t.len() + 2);
    k.extend_from_slice(b"u\x1f");
    k.extend_from_slice(t.as_bytes());
    k
}

fn bigram_key(a: &str, b: &str) -> Vec<u8> {
    let mut k = Vec::with_capacity(a.len() + b.len() + 3);
    k.extend_from_slice(b"b\x1f");
    k.extend_from_slice(a.as_bytes());
    k.push(0x1f);
    k.extend_from_slice(b.as_bytes());
    k
}

/// Sparse feature vector sorted by index: hashed uni- and bigram counts
/// scaled as `1 + ln(count)`, optionally L2-normalised.
pub fn featurize(tokens: &[String], dim: usize, normalize: bool) -> Vec<(usize, f64)> {
    let mut counts: HashMap<Vec<u8>, u32> = HashMap::new();
    for t in tokens {
        *counts.entry(unigram_key(t)).or_default() += 1;
    }
    for pair in tokens.windows(2) {
        *counts.entry(bigram_key(&pair[0], &pair[1])).or_default() += 1;
    }
    let mut buckets: HashMap<usize, f64> = HashMap::new();
    for (key, n) in counts {
        let idx = (fnv1a64(&key) % dim as u64) as usize;
        *buckets.entry(idx).or_default() += 1.0 + f64::from(n).ln();
    }
    let mut out: Vec<(usize, f64)> = buckets.into_iter().collect();
    out.sort_unstable_by_key(|(i, _)| *i);
    if normalize {
        let norm = out.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut out {
                *v /= norm;
            }
        }
    }
    out
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub normalize: bool,
    pub folds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { dim: DEFAULT_DIM, epochs: 20, learning_rate: 0.5, l2: 1e-6, seed: 7, normalize: true, folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    pub dim: usize,
    pub seed: u64,
    pub normalize: bool,
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl ReferenceModel {
    pub fn zero(dim: usize, normalize: bool) -> Self {
        ReferenceModel { dim, seed: 0, normalize, bias: 0.0, weights: vec![0.0; dim] }
    }

    /// Set the weight of the unigram feature for `token`.
    pub fn set_token_weight(&mut self, token: &str, weight: f64) {
        let idx = (fnv1a64(&unigram_key(token)) % self.dim as u64) as usize;
        self.weights[idx] = weight;
    }

    pub fn logit(&self, tokens: &[String]) -> f64 {
        featurize(tokens, self.dim, self.normalize)
            .into_iter()
            .fold(self.bias, |acc, (i, v)| acc + self.weights[i] * v)
    }

    pub fn predict(&self, tokens: &[String]) -> f64 {
        sigmoid(self.logit(tokens))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(out, "dim {}", self.dim);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "normalize {}", u8::from(self.normalize));
        let _ = writeln!(out, "bias {}", self.bias);
        for (i, w) in self.weights.iter().enumerate().filter(|(_, w)| **w != 0.0) {
            let _ = writeln!(out, "{i} {w}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DetectorError> {
        let bad = |m: &str| DetectorError::ModelFormat(m.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(bad("missing magic header"));
        }
        let version: u32 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing version"))?;
        if version != FORMAT_VERSION {
            return Err(DetectorError::ModelFormat(format!("unsupported version {version}")));
        }
        let mut field = |name: &str| -> Result<String, DetectorError> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let (k, v) = line.split_once(' ').ok_or_else(|| bad("malformed header line"))?;
            if k != name {
                return Err(DetectorError::ModelFormat(format!("expected {name}, found {k}")));
            }
            Ok(v.trim().to_string())
        };
        let dim: usize = field("dim")?.parse().map_err(|_| bad("dim"))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| bad("seed"))?;
        let normalize = field("normalize")? == "1";
        let bias: f64 = field("bias")?.parse().map_err(|_| bad("bias"))?;
        if dim == 0 {
            return Err(bad("dim must be positive"));
        }
        let mut weights = vec![0.0; dim];
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (i, w) = line.split_once(' ').ok_or_else(|| bad("malformed weight line"))?;
            let i: usize = i.parse().map_err(|_| bad("weight index"))?;
            let w: f64 = w.trim().parse().map_err(|_| bad("weight value"))?;
            *weights.get_mut(i).ok_or_else(|| bad("weight index out of range"))? = w;
        }
        Ok(ReferenceModel { dim, seed, normalize, bias, weights })
    }

    pub fn save(&self, path: &Path) -> Result<(), DetectorError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DetectorError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

impl Scorer for ReferenceModel {
    fn score(&self, chunk: &Chunk) -> Result<f64, ScorerError> {
        Ok(self.predict(&chunk.tokens))
    }

    fn version(&self) -> String {
        format!("reference-v{FORMAT_VERSION}-dim{}-seed{}", self.dim, self.seed)
    }
}

/// Train on labelled token sequences. Classes are re-weighted to equal
/// total mass; example order is reshuffled every epoch from `seed`.
pub fn train(examples: &[(Vec<String>, Label)], config: &TrainConfig) -> Result<ReferenceModel, DetectorError> {
    if examples.is_empty() {
        return Err(DetectorError::EmptyCorpus);
    }
    let n_pos = examples.iter().filter(|(_, l)| l.is_phishing()).count();
    let n_neg = examples.len() - n_pos;
    if n_pos == 0 {
        return Err(DetectorError::DegenerateCorpus(Label::Benign));
    }
    if n_neg == 0 {
        return Err(DetectorError::DegenerateCorpus(Label::Phishing));
    }
    let n = examples.len() as f64;
    let w_pos = n / (2.0 * n_pos as f64);
    let w_neg = n / (2.0 * n_neg as f64);

    let feats: Vec<Vec<(usize, f64)>> =
        examples.iter().map(|(t, _)| featurize(t, config.dim, config.normalize)).collect();
    let mut model = ReferenceModel::zero(config.dim, config.normalize);
    model.seed = config.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let lr = config.learning_rate / (1.0 + epoch as f64 * 0.5);
        for &i in &order {
            let x = &feats[i];
            let y = if examples[i].1.is_phishing() { 1.0 } else { 0.0 };
            let z = x.iter().fold(model.bias, |acc, &(j, v)| acc + model.weights[j] * v);
            let cw = if y > 0.5 { w_pos } else { w_neg };
            let g = (sigmoid(z) - y) * cw;
            for &(j, v) in x {
                let w = &mut model.weights[j];
                *w -= lr * (g * v + config.l2 * *w);
            }
            model.bias -= lr * g;
        }
    }
    Ok(model)
}

/// Chunk-level training examples; each chunk inherits its page's label.
pub fn chunk_examples(chunks_by_page: &[(Vec<Chunk>, Label)]) -> Vec<(Vec<String>, Label)> {
    chunks_by_page
        .iter()
        .flat_map(|(chunks, label)| chunks.iter().map(move |c| (c.tokens.clone(), *label)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn fnv_reference_vectors() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn zero_model_scores_one_half() {
        let m = ReferenceModel::zero(64, true);
        assert_eq!(m.predict(&[]), 0.5);
        assert_eq!(m.predict(&toks("anything at all")), 0.5);
    }

    #[test]
    fn hand_evaluated_toy_model() {
        let mut m = ReferenceModel::zero(DEFAULT_DIM, false);
        m.bias = -0.5;
        m.set_token_weight("verify", 1.0);
        m.set_token_weight("password", 2.0);
        m.set_token_weight("about", -3.0);
        // two positive unigrams, one bigram with zero weight: z = -0.5 + 1 + 2
        let p = m.predict(&toks("verify password"));
        assert!((p - 1.0 / (1.0 + (-2.5f64).exp())).abs() < 1e-12);
        assert!(p > 0.5);
    }

    #[test]
    fn separable_corpus_is_learned() {
        let mut ex = Vec::new();
        for _ in 0..20 {
            ex.push((toks("login password"), Label::Phishing));
            ex.push((toks("news weather"), Label::Benign));
        }
        let m = train(&ex, &TrainConfig { dim: 1 << 12, ..TrainConfig::default() }).unwrap();
        let acc = ex.iter().filter(|(t, l)| (m.predict(t) >= 0.5) == l.is_phishing()).count();
        assert_eq!(acc, ex.len());
    }

    #[test]
    fn single_class_is_degenerate() {
        let ex = vec![(toks("a"), Label::Phishing)];
        assert!(matches!(train(&ex, &TrainConfig::default()), Err(DetectorError::DegenerateCorpus(_))));
    }

    #[test]
    fn seeded_training_is_bitwise_reproducible() {
        let ex: Vec<_> = (0..30)
            .map(|i| (toks(&format!("w{} x{}", i % 7, i % 3)), if i % 2 == 0 { Label::Phishing } else { Label::Benign }))
            .collect();
        let cfg = TrainConfig { dim: 1 << 10, seed: 3, ..TrainConfig::default() };
        let a = train(&ex, &cfg).unwrap();
        let b = train(&ex, &cfg).unwrap();
        assert!(a.weights.iter().zip(&b.weights).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.bias.to_bits(), b.bias.to_bits());
    }

    #[test]
    fn model_text_round_trip() {
        let mut m = ReferenceModel::zero(1 << 8, true);
        m.bias = -0.123456789;
        m.set_token_weight("x", 0.1 + 0.2);
        let back = ReferenceModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(ReferenceModel::from_text("garbage").is_err());
    }
}
