//! Perturbation-based element importance: random element masks are scored
//! through the pipeline and a proximity-weighted ridge regression over
//! element-presence indicators serves as the local surrogate.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExplainerError;
use crate::detector::{classify_document, DetectorError, Scorer};
use crate::parser::ParsedDocument;
use crate::window::{self, WindowConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceConfig {
    pub samples: usize,
    /// Width of the exponential kernel over masked-fraction distance.
    pub kernel_width: f64,
    pub ridge: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        ImportanceConfig { samples: 500, kernel_width: 0.75, ridge: 1e-3, top_k: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagImportance {
    pub order_index: usize,
    pub weight: f64,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    /// Elements with positive weight, strongest first.
    pub ranked: Vec<TagImportance>,
    pub intercept: f64,
    pub samples: usize,
}

impl Importance {
    pub fn top(&self, k: usize) -> &[TagImportance] {
        &self.ranked[..k.min(self.ranked.len())]
    }
}

/// Phishing confidence of a (possibly masked) document under `scorer`.
pub fn pipeline_confidence<S: Scorer + ?Sized>(
    scorer: &S,
    window: WindowConfig,
    threshold: f64,
) -> impl Fn(&ParsedDocument) -> Result<f64, DetectorError> + '_ {
    move |doc| Ok(classify_document(scorer, doc, &window, threshold)?.confidence)
}

/// Rank the elements of `doc` by their surrogate weight.
pub fn tag_importance<F, E>(doc: &ParsedDocument, mut score: F, cfg: &ImportanceConfig) -> Result<Importance, ExplainerError>
where
    F: FnMut(&ParsedDocument) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let n = doc.elements.len();
    if n == 0 {
        return Err(ExplainerError::Degenerate);
    }
    let samples = cfg.samples.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = DMatrix::<f64>::zeros(samples, n + 1);
    let mut y = DVector::<f64>::zeros(samples);
    let mut w = DVector::<f64>::zeros(samples);
    let width2 = cfg.kernel_width * cfg.kernel_width;
    for s in 0..samples {
        let mut masked = vec![false; n];
        // the first sample is the unperturbed page
        if s > 0 {
            let k = rng.gen_range(1..=n);
            for i in sample(&mut rng, n, k) {
                masked[i] = true;
            }
        }
        let removed = masked.iter().filter(|m| **m).count();
        x[(s, 0)] = 1.0;
        for (i, m) in masked.iter().enumerate() {
            x[(s, i + 1)] = if *m { 0.0 } else { 1.0 };
        }
        let d = removed as f64 / n as f64;
        w[s] = (-d * d / width2).exp();
        y[s] = score(&doc.without_elements(&masked)).map_err(|e| ExplainerError::Scoring(e.to_string()))?;
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if hi - lo < 1e-12 {
        return Err(ExplainerError::Degenerate);
    }

    // (X^T W X + lambda I) beta = X^T W y, intercept unpenalised
    let xw = DMatrix::from_fn(samples, n + 1, |r, c| x[(r, c)] * w[r]);
    let mut gram = x.transpose() * &xw;
    for i in 1..=n {
        gram[(i, i)] += cfg.ridge;
    }
    let rhs = xw.transpose() * &y;
    let beta = gram
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .or_else(|| gram.lu().solve(&rhs))
        .ok_or(ExplainerError::Degenerate)?;

    let mut ranked: Vec<TagImportance> = (0..n)
        .filter(|&i| beta[i + 1] > 0.0)
        .map(|i| TagImportance {
            order_index: doc.elements[i].order_index,
            weight: beta[i + 1],
            tokens: window::tokenize(&doc.elements[i].render()).into_iter().map(|t| t.text).collect(),
        })
        .collect();
    ranked.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.order_index.cmp(&b.order_index)));
    Ok(Importance { ranked, intercept: beta[0], samples })
}
