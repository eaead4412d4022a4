use std::collections::BTreeMap;

use chrono::{DateTime, SecondsFormat, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    adjusted_score, category_score, classify_tier, faas, overall_score, raw_fairness_scores, ScoreError, Tier,
    SIGNIFICANCE_LEVEL,
};
use crate::alignment::{corpus_wer, score_pair, AlignError, AlignmentCounts, ScoredUtterance};
use crate::corpus::{Attribute, Corpus, UtteranceRecord};
use crate::glmm::{
    build_design, fit_poisson_glmm, lrt, predict_group_wer, Design, DesignRow, DesignSpec, FitOptions, GlmmError,
    LrtResult, ModelSummary,
};
use crate::transcripts::Transcripts;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub attributes: Vec<Attribute>,
    pub weights: BTreeMap<Attribute, f64>,
    /// Minimum fraction of corpus utterances that must have a hypothesis.
    pub coverage_threshold: f64,
    pub normalize: bool,
    pub min_level_count: usize,
    pub continuity_correction: bool,
    pub retain_per_utterance: bool,
    pub fit: FitOptions,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            attributes: Attribute::AUDITED.to_vec(),
            weights: Attribute::AUDITED.iter().map(|&a| (a, 1.0)).collect(),
            coverage_threshold: 0.95,
            normalize: true,
            min_level_count: 10,
            continuity_correction: true,
            retain_per_utterance: true,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("transcripts cover {coverage:.4} of the corpus, below the required {threshold:.4}")]
    CoverageTooLow { coverage: f64, threshold: f64 },
    #[error("utterance {utterance_id}: {source}")]
    Alignment {
        utterance_id: String,
        #[source]
        source: AlignError,
    },
    #[error("attribute {attribute}: {source}")]
    Model {
        attribute: Attribute,
        #[source]
        source: GlmmError,
    },
    #[error("attribute {attribute}: {source}")]
    Score {
        attribute: Attribute,
        #[source]
        source: ScoreError,
    },
    #[error("{0}")]
    Combine(#[source] ScoreError),
    #[error("no weight configured for attribute {0}")]
    MissingWeight(Attribute),
}

/// How the FAAS value should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaasStatus {
    Defined,
    /// WER is zero; FAAS is undefined and the model ranks first.
    PerfectAccuracy,
    /// Overall fairness is zero; FAAS is negative infinity.
    ZeroOverall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub level: String,
    pub n_utterances: usize,
    pub proportion: f64,
    pub observed_wer: f64,
    pub coefficient: f64,
    pub predicted_wer: f64,
    pub raw_score: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merged_from: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub attribute: Attribute,
    pub reference_level: String,
    pub weight: f64,
    pub groups: Vec<GroupRow>,
    pub category_score: f64,
    pub lrt: LrtResult,
    pub significant: bool,
    pub adjusted_score: f64,
    pub tier: Tier,
    /// Fitted models; absent when no errors were observed and nothing was fit.
    pub full_model: Option<ModelSummary>,
    pub reduced_model: Option<ModelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceDetail {
    pub utterance_id: String,
    pub speaker_id: String,
    pub counts: AlignmentCounts,
    pub error_count: u32,
    pub wer: f64,
    /// Group of this utterance for every audited attribute, after merging.
    pub groups: BTreeMap<Attribute, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub model_id: String,
    pub wer: f64,
    pub faas: Option<f64>,
    pub faas_status: FaasStatus,
    pub overall_score: f64,
    pub tier: Tier,
    pub categories: Vec<CategoryReport>,
    pub n_utterances: usize,
    pub coverage: f64,
    pub missing_hypotheses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_utterance: Option<Vec<UtteranceDetail>>,
    #[serde(with = "rfc3339")]
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub fraction: f64,
    pub seed: u64,
}

impl AuditResult {
    /// Sort key for leaderboards: perfect accuracy ranks above any finite
    /// FAAS and zero fairness below.
    pub fn faas_rank_key(&self) -> f64 {
        match self.faas_status {
            FaasStatus::Defined => self.faas.unwrap_or(f64::NEG_INFINITY),
            FaasStatus::PerfectAccuracy => f64::INFINITY,
            FaasStatus::ZeroOverall => f64::NEG_INFINITY,
        }
    }

    pub fn category(&self, attribute: Attribute) -> Option<&CategoryReport> {
        self.categories.iter().find(|c| c.attribute == attribute)
    }
}

mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

struct Scored<'a> {
    record: &'a UtteranceRecord,
    scored: ScoredUtterance,
}

fn category_report(
    attribute: Attribute,
    weight: f64,
    scored: &[Scored<'_>],
    config: &AuditConfig,
) -> Result<(CategoryReport, Design), AuditError> {
    let model_err = |source| AuditError::Model { attribute, source };
    let score_err = |source| AuditError::Score { attribute, source };

    let rows: Vec<DesignRow> = scored
        .iter()
        .map(|s| DesignRow {
            group: s.record.speaker_id.clone(),
            level: s.record.profile.get(attribute).to_string(),
            errors: s.scored.error_count,
            ref_len: s.scored.counts.ref_len,
        })
        .collect();
    let spec = DesignSpec {
        min_level_count: config.min_level_count,
        continuity_correction: config.continuity_correction,
        ..DesignSpec::new(attribute.as_str())
    };
    let design = build_design(&rows, &spec).map_err(model_err)?;
    let n = design.n_rows() as f64;

    let mut level_errors = vec![(0u64, 0u64); design.levels().len()];
    let index: BTreeMap<&str, usize> = design
        .levels()
        .iter()
        .enumerate()
        .map(|(k, l)| (l.name.as_str(), k))
        .collect();
    for (i, row) in rows.iter().enumerate() {
        let e = &mut level_errors[index[design.level_of_row(i)]];
        e.0 += u64::from(row.errors);
        e.1 += u64::from(row.ref_len);
    }
    let total_errors: u64 = level_errors.iter().map(|e| e.0).sum();

    let (predicted, coefficients, lrt_result, full_model, reduced_model) = if total_errors == 0 {
        // nothing to model: every group is error-free
        let zeros: BTreeMap<String, f64> = design.levels().iter().map(|l| (l.name.clone(), 0.0)).collect();
        let lrt = LrtResult {
            stat: 0.0,
            df: design.attribute_df(),
            p_value: 1.0,
        };
        (zeros.clone(), zeros, lrt, None, None)
    } else {
        let reduced_design = design.without_attribute();
        let full = fit_poisson_glmm(&design, &config.fit).map_err(model_err)?;
        let reduced = fit_poisson_glmm(&reduced_design, &config.fit).map_err(model_err)?;
        let test = lrt(&full, &reduced, design.attribute_df()).map_err(model_err)?;
        let xbar = design.mean_log_ref_len();
        let predicted = design
            .levels()
            .iter()
            .map(|l| Ok((l.name.clone(), predict_group_wer(&full, &l.name, xbar)?)))
            .collect::<Result<BTreeMap<_, _>, GlmmError>>()
            .map_err(model_err)?;
        (predicted, full.beta_g(), test, Some(full.summary()), Some(reduced.summary()))
    };

    let raw = raw_fairness_scores(&predicted).map_err(score_err)?;
    let proportions: BTreeMap<String, f64> = design
        .levels()
        .iter()
        .map(|l| (l.name.clone(), l.rows as f64 / n))
        .collect();
    let category = category_score(&raw, &proportions).map_err(score_err)?;
    let adjusted = adjusted_score(category, lrt_result.p_value);

    let groups = design
        .levels()
        .iter()
        .zip(&level_errors)
        .map(|(l, &(errors, words))| GroupRow {
            level: l.name.clone(),
            n_utterances: l.rows,
            proportion: proportions[&l.name],
            observed_wer: errors as f64 / words as f64,
            coefficient: coefficients[&l.name],
            predicted_wer: predicted[&l.name],
            raw_score: raw[&l.name],
            merged_from: l.merged_from.clone(),
        })
        .collect();

    let report = CategoryReport {
        attribute,
        reference_level: design.reference_level().unwrap_or_default().to_string(),
        weight,
        groups,
        category_score: category,
        lrt: lrt_result,
        significant: lrt_result.p_value < SIGNIFICANCE_LEVEL,
        adjusted_score: adjusted,
        tier: classify_tier(adjusted),
        full_model,
        reduced_model,
    };
    Ok((report, design))
}

/// Scores `transcripts` against `corpus` and produces the full fairness
/// audit for `model_id`.
pub fn run_audit(
    corpus: &Corpus,
    transcripts: &Transcripts,
    model_id: &str,
    config: &AuditConfig,
) -> Result<AuditResult, AuditError> {
    let covered: Vec<&UtteranceRecord> = corpus
        .iter()
        .filter(|r| transcripts.get(&r.utterance_id).is_some())
        .collect();
    let missing_hypotheses: Vec<String> = corpus
        .iter()
        .filter(|r| transcripts.get(&r.utterance_id).is_none())
        .map(|r| r.utterance_id.clone())
        .collect();
    let coverage = covered.len() as f64 / corpus.len().max(1) as f64;
    if covered.is_empty() || coverage < config.coverage_threshold {
        return Err(AuditError::CoverageTooLow {
            coverage,
            threshold: config.coverage_threshold,
        });
    }

    let scored: Vec<Scored<'_>> = covered
        .par_iter()
        .map(|&record| {
            let hyp = transcripts.get(&record.utterance_id).unwrap_or_default();
            score_pair(&record.utterance_id, &record.reference, hyp, config.normalize)
                .map(|scored| Scored { record, scored })
                .map_err(|source| AuditError::Alignment {
                    utterance_id: record.utterance_id.clone(),
                    source,
                })
        })
        .collect::<Result<_, _>>()?;
    let wer = corpus_wer(scored.iter().map(|s| &s.scored)).map_err(|source| AuditError::Alignment {
        utterance_id: String::new(),
        source,
    })?;

    let weights = config
        .attributes
        .iter()
        .map(|&a| {
            config
                .weights
                .get(&a)
                .map(|&w| (a, w))
                .ok_or(AuditError::MissingWeight(a))
        })
        .collect::<Result<BTreeMap<_, _>, _>>()?;

    let fitted: Vec<(CategoryReport, Design)> = config
        .attributes
        .par_iter()
        .map(|&a| category_report(a, weights[&a], &scored, config))
        .collect::<Result<_, _>>()?;

    let adjusted: BTreeMap<Attribute, f64> = fitted.iter().map(|(r, _)| (r.attribute, r.adjusted_score)).collect();
    let overall = overall_score(&adjusted, &weights).map_err(AuditError::Combine)?;
    let (faas_value, faas_status) = match faas(overall, wer) {
        Ok(v) => (Some(v), FaasStatus::Defined),
        Err(ScoreError::ZeroWer) => (None, FaasStatus::PerfectAccuracy),
        Err(ScoreError::ZeroOverall) => (None, FaasStatus::ZeroOverall),
        Err(e) => return Err(AuditError::Combine(e)),
    };

    let per_utterance = config.retain_per_utterance.then(|| {
        scored
            .iter()
            .enumerate()
            .map(|(i, s)| UtteranceDetail {
                utterance_id: s.scored.utterance_id.clone(),
                speaker_id: s.record.speaker_id.clone(),
                counts: s.scored.counts,
                error_count: s.scored.error_count,
                wer: s.scored.wer,
                groups: fitted
                    .iter()
                    .map(|(r, d)| (r.attribute, d.level_of_row(i).to_string()))
                    .collect(),
            })
            .collect()
    });

    // millisecond precision keeps the stored document stable across a round trip
    let created_at = DateTime::parse_from_rfc3339(&Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true))
        .expect("valid timestamp")
        .with_timezone(&Utc);

    Ok(AuditResult {
        model_id: model_id.to_string(),
        wer,
        faas: faas_value,
        faas_status,
        overall_score: overall,
        tier: classify_tier(overall),
        categories: fitted.into_iter().map(|(r, _)| r).collect(),
        n_utterances: scored.len(),
        coverage,
        missing_hypotheses,
        sample: corpus
            .provenance()
            .sampled
            .map(|(fraction, seed)| SampleInfo { fraction, seed }),
        per_utterance,
        created_at,
    })
}
