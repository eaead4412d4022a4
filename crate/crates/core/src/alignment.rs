//! Token normalization and minimum-edit-distance alignment.
//!
//! Alignment uses unit costs for substitutions, deletions and insertions.
//! When several edit paths are optimal the backtrace prefers, at each cell,
//! match over substitution over deletion over insertion, so per-utterance
//! counts are reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignError {
    #[error("reference has no tokens")]
    EmptyReference,
    #[error("reference length is zero")]
    ZeroReference,
    #[error("no utterances to pool")]
    EmptyCollection,
}

/// Lowercases, removes Unicode punctuation and splits on whitespace.
///
/// Punctuation is deleted rather than replaced by a space, so `it's` becomes
/// `its`.
pub fn normalize_text(raw: &str) -> Vec<String> {
    let cleaned: String = raw
        .chars()
        .filter(|c| c.general_category_group() != GeneralCategoryGroup::Punctuation)
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Whitespace tokenization with no other normalization.
pub fn split_tokens(raw: &str) -> Vec<String> {
    raw.split_whitespace().map(str::to_owned).collect()
}

/// Edit-operation counts of one reference/hypothesis alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentCounts {
    #[serde(rename = "S")]
    pub substitutions: u32,
    #[serde(rename = "D")]
    pub deletions: u32,
    #[serde(rename = "I")]
    pub insertions: u32,
    #[serde(rename = "C")]
    pub matches: u32,
    #[serde(rename = "N")]
    pub ref_len: u32,
}

impl AlignmentCounts {
    pub fn errors(&self) -> u32 {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn hyp_len(&self) -> u32 {
        self.substitutions + self.insertions + self.matches
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Match,
    Sub,
    Del,
    Ins,
}

// Path costs are compared lexicographically on (edits, substitutions): the
// high half counts edits, the low half substitutions. Among minimum-edit
// alignments this keeps the one with the most matches, which makes the
// counts independent of which sequence is the reference.
const GAP: u64 = 1 << 32;
const SUB: u64 = GAP + 1;

/// Aligns `hyp` against `reference` and returns the operation counts of a
/// minimum-cost path. Among minimum-cost paths the one with the fewest
/// substitutions is chosen; remaining ties prefer match, then
/// substitution, deletion and insertion while tracing back.
pub fn align<T: PartialEq>(reference: &[T], hyp: &[T]) -> Result<AlignmentCounts, AlignError> {
    if reference.is_empty() {
        return Err(AlignError::EmptyReference);
    }
    let n = reference.len();
    let m = hyp.len();
    let width = m + 1;

    // cost[i * width + j]: best cost of aligning reference[..i] with hyp[..j]
    let mut cost = vec![0u64; (n + 1) * width];
    for j in 0..=m {
        cost[j] = j as u64 * GAP;
    }
    for i in 1..=n {
        cost[i * width] = i as u64 * GAP;
        for j in 1..=m {
            let step = if reference[i - 1] == hyp[j - 1] { 0 } else { SUB };
            let diag = cost[(i - 1) * width + j - 1] + step;
            let up = cost[(i - 1) * width + j] + GAP;
            let left = cost[i * width + j - 1] + GAP;
            cost[i * width + j] = diag.min(up).min(left);
        }
    }

    let mut counts = AlignmentCounts {
        ref_len: n as u32,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        let op = if i > 0 && j > 0 && reference[i - 1] == hyp[j - 1] && cost[(i - 1) * width + j - 1] == here {
            Op::Match
        } else if i > 0 && j > 0 && cost[(i - 1) * width + j - 1] + SUB == here {
            Op::Sub
        } else if i > 0 && cost[(i - 1) * width + j] + GAP == here {
            Op::Del
        } else {
            Op::Ins
        };
        match op {
            Op::Match => {
                counts.matches += 1;
                i -= 1;
                j -= 1;
            }
            Op::Sub => {
                counts.substitutions += 1;
                i -= 1;
                j -= 1;
            }
            Op::Del => {
                counts.deletions += 1;
                i -= 1;
            }
            Op::Ins => {
                counts.insertions += 1;
                j -= 1;
            }
        }
    }
    debug_assert_eq!(u64::from(counts.errors()), cost[n * width + m] >> 32);
    Ok(counts)
}

/// `(S + D + I) / N` for one alignment.
pub fn wer(counts: &AlignmentCounts) -> Result<f64, AlignError> {
    if counts.ref_len == 0 {
        return Err(AlignError::ZeroReference);
    }
    Ok(counts.errors() as f64 / counts.ref_len as f64)
}

/// One scored utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredUtterance {
    pub utterance_id: String,
    pub counts: AlignmentCounts,
    pub error_count: u32,
    pub wer: f64,
}

impl ScoredUtterance {
    pub fn new(utterance_id: impl Into<String>, counts: AlignmentCounts) -> Result<Self, AlignError> {
        Ok(Self {
            utterance_id: utterance_id.into(),
            wer: wer(&counts)?,
            error_count: counts.errors(),
            counts,
        })
    }
}

/// Normalizes (optionally) and aligns a reference/hypothesis text pair.
pub fn score_pair(
    utterance_id: &str,
    reference: &str,
    hypothesis: &str,
    normalize: bool,
) -> Result<ScoredUtterance, AlignError> {
    let tokenize = if normalize { normalize_text } else { split_tokens };
    let counts = align(&tokenize(reference), &tokenize(hypothesis))?;
    ScoredUtterance::new(utterance_id, counts)
}

/// Pooled corpus WER: total errors over total reference tokens.
pub fn corpus_wer<'a, I>(scored: I) -> Result<f64, AlignError>
where
    I: IntoIterator<Item = &'a ScoredUtterance>,
{
    let (errors, words, n) = scored.into_iter().fold((0u64, 0u64, 0usize), |(e, w, n), s| {
        (e + u64::from(s.error_count), w + u64::from(s.counts.ref_len), n + 1)
    });
    if n == 0 {
        return Err(AlignError::EmptyCollection);
    }
    if words == 0 {
        return Err(AlignError::ZeroReference);
    }
    Ok(errors as f64 / words as f64)
}
