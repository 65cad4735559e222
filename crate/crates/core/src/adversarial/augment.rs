//! Adversarial training-set construction for retraining patches.

use std::fmt::Display;

use serde::{Deserialize, Serialize};

use super::attribution::{attribute_primary_attacks, population_sigma};
use super::optimizer::{optimize, AttackRun, OptimizerConfig};
use super::{AttackError, ManipulationId};
use crate::pipeline::LabeledPage;
use crate::window::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Augmented {
    pub target: ManipulationId,
    /// Best adversarial variants, labeled phishing.
    pub pages: Vec<LabeledPage>,
    /// Every optimizer run, with attribution filled in.
    pub runs: Vec<AttackRun>,
    pub sigma: f64,
    /// Input pages the current pipeline did not classify as phishing.
    pub skipped: Vec<String>,
}

/// Attack every phishing page of `corpus`, attribute primaries with the
/// corpus-wide sigma, and keep the best variants of documents whose primaries
/// include `target`.
pub fn augment_corpus<F, E>(
    corpus: &[LabeledPage],
    target: ManipulationId,
    mut query: F,
    config: &OptimizerConfig,
) -> Result<Augmented, AttackError>
where
    F: FnMut(&str, &str) -> Result<f64, E>,
    E: Display,
{
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for page in corpus.iter().filter(|p| p.label == Label::Phishing) {
        match optimize(&page.id, &page.html, &page.url, |h: &str| query(h, &page.url), config) {
            Ok(run) => runs.push(run),
            Err(AttackError::NotPhishing(_)) => skipped.push(page.id.clone()),
            Err(e) => return Err(e),
        }
    }
    let sigma = population_sigma(&runs);
    let mut pages = Vec::new();
    for run in &mut runs {
        let a = attribute_primary_attacks(run, sigma);
        run.set_attribution(&a);
        if a.primaries.contains(&target) {
            pages.push(LabeledPage::new(
                format!("{}-adv-{}", run.document_id, target),
                run.url.clone(),
                run.best_html.clone(),
                Label::Phishing,
            ));
        }
    }
    if pages.is_empty() {
        return Err(AttackError::EmptySelection(target));
    }
    Ok(Augmented { target, pages, runs, sigma, skipped })
}

/// Training set for adversarial retraining: the clean pages plus every
/// adversarial page repeated `weight` times.
pub fn retraining_set(clean: &[LabeledPage], adversarial: &[LabeledPage], weight: usize) -> Vec<LabeledPage> {
    let mut out = clean.to_vec();
    for _ in 0..weight.max(1) {
        out.extend_from_slice(adversarial);
    }
    out
}

/// Default repetition of adversarial pages in [`retraining_set`].
pub const DEFAULT_ADVERSARIAL_WEIGHT: usize = 4;
