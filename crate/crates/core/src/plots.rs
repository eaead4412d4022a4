//! Plot-ready summaries of per-utterance WER: box-plot five-number
//! summaries and fixed-width histograms per demographic group.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Attribute;
use crate::fairness::AuditResult;

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.05;
pub const HISTOGRAM_MAX: f64 = 2.0;
pub const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlotError {
    #[error("audit {0:?} was stored without per-utterance detail")]
    NoDetail(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between closest ranks,
/// `h = (n - 1) * q` on the sorted sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(FiveNumber {
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

/// 40 bins of width 0.05 on [0, 2] (the last bin closed) plus an overflow
/// count for WER above 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub range: [f64; 2],
    pub counts: Vec<u32>,
    pub overflow: u32,
}

pub fn histogram(values: &[f64]) -> Histogram {
    let mut counts = vec![0u32; HISTOGRAM_BINS];
    let mut overflow = 0;
    for &w in values {
        if w > HISTOGRAM_MAX {
            overflow += 1;
            continue;
        }
        // nudge so exact bin edges such as 0.15 land in the upper bin
        let k = ((w / HISTOGRAM_BIN_WIDTH) + 1e-9).floor().max(0.0) as usize;
        counts[k.min(HISTOGRAM_BINS - 1)] += 1;
    }
    Histogram {
        bin_width: HISTOGRAM_BIN_WIDTH,
        range: [0.0, HISTOGRAM_MAX],
        counts,
        overflow,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPlot {
    pub level: String,
    pub n: usize,
    #[serde(rename = "box")]
    pub boxplot: FiveNumber,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributePlots {
    pub attribute: Attribute,
    pub groups: Vec<GroupPlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSummary {
    pub model_id: String,
    pub overall: GroupPlot,
    pub attributes: Vec<AttributePlots>,
}

fn group_plot(level: String, values: &[f64]) -> Option<GroupPlot> {
    Some(GroupPlot {
        level,
        n: values.len(),
        boxplot: five_number(values)?,
        histogram: histogram(values),
    })
}

/// Builds the per-group plot data for an audit that retained its
/// per-utterance detail.
pub fn plot_summary(result: &AuditResult) -> Result<PlotSummary, PlotError> {
    let detail = result
        .per_utterance
        .as_ref()
        .filter(|d| !d.is_empty())
        .ok_or_else(|| PlotError::NoDetail(result.model_id.clone()))?;

    let all: Vec<f64> = detail.iter().map(|d| d.wer).collect();
    let attributes = result
        .categories
        .iter()
        .map(|c| {
            let mut by_level: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for d in detail {
                if let Some(level) = d.groups.get(&c.attribute) {
                    by_level.entry(level.as_str()).or_default().push(d.wer);
                }
            }
            // keep the report's level order (reference first)
            let groups = c
                .groups
                .iter()
                .filter_map(|g| group_plot(g.level.clone(), by_level.get(g.level.as_str())?))
                .collect();
            AttributePlots {
                attribute: c.attribute,
                groups,
            }
        })
        .collect();

    Ok(PlotSummary {
        model_id: result.model_id.clone(),
        overall: group_plot("all".into(), &all).expect("non-empty detail"),
        attributes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_by_linear_interpolation() {
        let f = five_number(&[1.0, 0.0, 0.5, 0.0, 1.0]).unwrap();
        assert_eq!(f, FiveNumber { min: 0.0, q1: 0.0, median: 0.5, q3: 1.0, max: 1.0 });
        let f = five_number(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((f.q1, f.median, f.q3), (1.75, 2.5, 3.25));
        assert_eq!(five_number(&[]), None);
        let single = five_number(&[0.3]).unwrap();
        assert_eq!((single.min, single.q1, single.max), (0.3, 0.3, 0.3));
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.0, 0.0]);
        assert_eq!(h.counts[0], 3);
        assert_eq!(h.counts.iter().sum::<u32>(), 3);
        assert_eq!(h.overflow, 0);

        let h = histogram(&[3.0, 2.0, 0.15, 0.049]);
        assert_eq!(h.overflow, 1);
        assert_eq!(h.counts[HISTOGRAM_BINS - 1], 1);
        assert_eq!(h.counts[3], 1);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts.len(), 40);
    }
}
