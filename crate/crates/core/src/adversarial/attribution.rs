//! Primary-attack attribution.

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::{Deserialize, Serialize};

use super::optimizer::{optimize, AttackRun};
use super::{AttackError, ManipulationId};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub primaries: Vec<ManipulationId>,
    pub scenario1: bool,
    pub scenario2: bool,
}

/// Advantage contributed by each manipulation, summed over its stages
/// (multi-round manipulations can be kept in several rounds).
pub fn gains_by_manipulation(run: &AttackRun) -> BTreeMap<ManipulationId, f64> {
    let mut out = BTreeMap::new();
    for s in &run.stages {
        *out.entry(s.manipulation).or_insert(0.0) += s.gain;
    }
    out
}

/// Population standard deviation of per-manipulation advantages across runs.
pub fn population_sigma(runs: &[AttackRun]) -> f64 {
    let values: Vec<f64> = runs.iter().flat_map(|r| gains_by_manipulation(r).into_values()).collect();
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn rank(gains: &BTreeMap<ManipulationId, f64>, sigma: f64) -> Vec<ManipulationId> {
    let Some(top) = gains.values().copied().filter(|g| *g > 0.0).reduce(f64::max) else {
        return Vec::new();
    };
    let mut out: Vec<(ManipulationId, f64)> =
        gains.iter().filter(|(_, g)| **g > 0.0 && top - **g <= sigma).map(|(m, g)| (*m, *g)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out.into_iter().map(|(m, _)| m).collect()
}

/// Scenario 1: the manipulation with the largest advantage is primary, and
/// any other within `sigma` of it is co-primary. Zero advantages are never
/// attributed.
pub fn attribute_primary_attacks(run: &AttackRun, sigma: f64) -> Attribution {
    let primaries = rank(&gains_by_manipulation(run), sigma);
    Attribution { scenario1: !primaries.is_empty(), scenario2: false, primaries }
}

/// Scenario 1 followed by one removal round: the optimizer is rerun without
/// the Scenario 1 primaries, and the strongest remaining manipulation is
/// promoted if its advantage is positive and within `sigma` of the removed
/// primary's.
pub fn attribute_with_rerun<F, E>(
    run: &AttackRun,
    html: &str,
    query: F,
    sigma: f64,
) -> Result<(Attribution, Option<AttackRun>), AttackError>
where
    F: FnMut(&str) -> Result<f64, E>,
    E: Display,
{
    let mut attribution = attribute_primary_attacks(run, sigma);
    let Some(&lead) = attribution.primaries.first() else {
        return Ok((attribution, None));
    };
    let removed_gain = gains_by_manipulation(run)[&lead];
    let config = run.config.without(&attribution.primaries);
    if config.sr_set.is_empty() && config.mr_set.is_empty() {
        return Ok((attribution, None));
    }
    let rerun = optimize(&run.document_id, html, &run.url, query, &config)?;
    let best = gains_by_manipulation(&rerun)
        .into_iter()
        .filter(|(_, g)| *g > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
    if let Some((m, g)) = best {
        if (removed_gain - g).abs() <= sigma && !attribution.primaries.contains(&m) {
            attribution.primaries.push(m);
            attribution.scenario2 = true;
        }
    }
    Ok((attribution, Some(rerun)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversarial::optimizer::{OptimizerConfig, StageRecord};
    use crate::adversarial::ManipulationParams;
    use ManipulationId::*;

    fn run_with(gains: &[(ManipulationId, f64)]) -> AttackRun {
        let stages = gains
            .iter()
            .enumerate()
            .map(|(i, &(m, g))| StageRecord {
                stage: i,
                manipulation: m,
                params: ManipulationParams::default(),
                round: None,
                c_o: 0.9,
                c_p: 0.9 - g,
                advantage: g,
                gain: g,
                best_after: 0.0,
                queries_used: i + 1,
                kept: g > 0.0,
                note: None,
            })
            .collect();
        AttackRun {
            document_id: "d".into(),
            url: String::new(),
            config: OptimizerConfig::default(),
            rounds: 5,
            original_score: 0.9,
            stages,
            best_html: String::new(),
            best_score: 0.0,
            queries_used: gains.len(),
            baseline_queries: 1,
            primary_attacks: vec![],
            scenario1: false,
            scenario2: false,
        }
    }

    #[test]
    fn single_dominant_stage() {
        let a = attribute_primary_attacks(&run_with(&[(A8, 0.40), (A12, 0.05), (A13, 0.03)]), 0.08);
        assert_eq!(a.primaries, vec![A8]);
        assert!(a.scenario1);
    }

    #[test]
    fn close_stages_are_co_primary() {
        let a = attribute_primary_attacks(&run_with(&[(A12, 0.28), (A13, 0.30)]), 0.05);
        assert_eq!(a.primaries, vec![A13, A12]);
    }

    #[test]
    fn zero_advantage_yields_nothing() {
        let a = attribute_primary_attacks(&run_with(&[(A1, 0.0), (A2, 0.0)]), 0.1);
        assert!(a.primaries.is_empty());
        assert!(!a.scenario1);
    }

    #[test]
    fn multi_round_gains_accumulate() {
        let g = gains_by_manipulation(&run_with(&[(A1, 0.1), (A1, 0.15), (A2, 0.2)]));
        assert!((g[&A1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sigma_is_population_std() {
        // gains per manipulation: 0.1, 0.3 -> mean 0.2, population std 0.1
        let s = population_sigma(&[run_with(&[(A1, 0.1), (A2, 0.3)])]);
        assert!((s - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rerun_never_promotes_zero_advantage() {
        let page = "<html><body><script>x()</script></body></html>";
        let run = run_with(&[(A8, 0.4)]);
        let (a, rerun) =
            attribute_with_rerun(&run, page, |_: &str| Ok::<_, std::convert::Infallible>(0.9), 1.0).unwrap();
        assert_eq!(a.primaries, vec![A8]);
        assert!(!a.scenario2);
        assert!(rerun.is_some());
    }
}
