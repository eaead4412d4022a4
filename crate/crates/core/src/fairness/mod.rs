//! Fairness scoring cascade: group WER predictions are min-max scaled to
//! raw scores, weighted into a category score, penalized when the group
//! effect is significant, averaged across categories, and finally combined
//! with the corpus WER into the fairness-adjusted ASR score (FAAS).

mod audit;

pub use audit::{
    run_audit, AuditConfig, AuditError, AuditResult, CategoryReport, FaasStatus, GroupRow, SampleInfo, UtteranceDetail,
};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// p-values below this are treated as a significant disparity.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("at least two groups are required, got {0}")]
    TooFewLevels(usize),
    #[error("key sets differ: {0}")]
    KeyMismatch(String),
    #[error("proportions sum to {0}, expected 1")]
    BadProportions(f64),
    #[error("weight for {0:?} must be positive")]
    NonPositiveWeight(String),
    #[error("perfect accuracy (WER = 0): FAAS undefined, rank first")]
    ZeroWer,
    #[error("overall fairness score is zero: FAAS is negative infinity")]
    ZeroOverall,
    #[error("{name} = {value} is outside its valid range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("no categories to combine")]
    Empty,
}

/// Scales predicted group WERs to 0–100, best group 100 and worst 0. If
/// every group has the same prediction all scores are 100.
pub fn raw_fairness_scores(predicted: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>, ScoreError> {
    if predicted.len() < 2 {
        return Err(ScoreError::TooFewLevels(predicted.len()));
    }
    if let Some((_, &v)) = predicted.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(ScoreError::OutOfRange {
            name: "predicted_wer",
            value: v,
        });
    }
    let min = predicted.values().copied().fold(f64::INFINITY, f64::min);
    let max = predicted.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    Ok(predicted
        .iter()
        .map(|(level, &w)| {
            let score = if range > 0.0 {
                100.0 * (1.0 - (w - min) / range)
            } else {
                100.0
            };
            (level.clone(), score)
        })
        .collect())
}

fn check_keys<A, B>(a: &BTreeMap<String, A>, b: &BTreeMap<String, B>) -> Result<(), ScoreError> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        let left: Vec<&str> = a.keys().map(String::as_str).collect();
        let right: Vec<&str> = b.keys().map(String::as_str).collect();
        return Err(ScoreError::KeyMismatch(format!("{left:?} vs {right:?}")));
    }
    Ok(())
}

/// Proportion-weighted mean of the raw group scores.
pub fn category_score(
    scores: &BTreeMap<String, f64>,
    proportions: &BTreeMap<String, f64>,
) -> Result<f64, ScoreError> {
    check_keys(scores, proportions)?;
    let total: f64 = proportions.values().sum();
    if (total - 1.0).abs() > 1e-9 || proportions.values().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(ScoreError::BadProportions(total));
    }
    Ok(scores
        .iter()
        .map(|(level, s)| proportions[level] * s)
        .sum::<f64>())
}

/// Applies the proportional significance penalty `score * p / 0.05` when
/// `p < 0.05`.
pub fn adjusted_score(category_score: f64, p_value: f64) -> f64 {
    if p_value < SIGNIFICANCE_LEVEL {
        category_score * (p_value / SIGNIFICANCE_LEVEL)
    } else {
        category_score
    }
}

/// Weighted mean of adjusted category scores.
pub fn overall_score<K: Ord + fmt::Debug>(
    adjusted: &BTreeMap<K, f64>,
    weights: &BTreeMap<K, f64>,
) -> Result<f64, ScoreError> {
    if adjusted.is_empty() {
        return Err(ScoreError::Empty);
    }
    if adjusted.len() != weights.len() || adjusted.keys().zip(weights.keys()).any(|(a, b)| a != b) {
        return Err(ScoreError::KeyMismatch(format!(
            "{:?} vs {:?}",
            adjusted.keys().collect::<Vec<_>>(),
            weights.keys().collect::<Vec<_>>()
        )));
    }
    if let Some((k, _)) = weights.iter().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
        return Err(ScoreError::NonPositiveWeight(format!("{k:?}")));
    }
    let num: f64 = adjusted.iter().map(|(k, s)| weights[k] * s).sum();
    let den: f64 = weights.values().sum();
    Ok(num / den)
}

/// `10 * log10(overall / wer)` with WER as a fraction.
pub fn faas(overall: f64, wer: f64) -> Result<f64, ScoreError> {
    if !(wer >= 0.0) || !wer.is_finite() {
        return Err(ScoreError::OutOfRange { name: "wer", value: wer });
    }
    if !(0.0..=100.0).contains(&overall) {
        return Err(ScoreError::OutOfRange {
            name: "overall_score",
            value: overall,
        });
    }
    if wer == 0.0 {
        return Err(ScoreError::ZeroWer);
    }
    if overall == 0.0 {
        return Err(ScoreError::ZeroOverall);
    }
    Ok(10.0 * (overall / wer).log10())
}

/// Five-tier label over the 0–100 fairness scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "severely biased")]
    SeverelyBiased,
    #[serde(rename = "biased")]
    Biased,
    #[serde(rename = "moderately fair")]
    ModeratelyFair,
    #[serde(rename = "fair")]
    Fair,
    #[serde(rename = "exemplarily fair")]
    ExemplarilyFair,
}

impl Tier {
    pub fn label(self) -> &'static str {
        match self {
            Tier::SeverelyBiased => "severely biased",
            Tier::Biased => "biased",
            Tier::ModeratelyFair => "moderately fair",
            Tier::Fair => "fair",
            Tier::ExemplarilyFair => "exemplarily fair",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Uniform 20-point buckets: [0,20) severely biased … [80,100] exemplarily fair.
pub fn classify_tier(score: f64) -> Tier {
    match score {
        s if s < 20.0 => Tier::SeverelyBiased,
        s if s < 40.0 => Tier::Biased,
        s if s < 60.0 => Tier::ModeratelyFair,
        s if s < 80.0 => Tier::Fair,
        _ => Tier::ExemplarilyFair,
    }
}
