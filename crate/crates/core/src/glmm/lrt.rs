use serde::{Deserialize, Serialize};

use super::fit::FittedModel;
use super::GlmmError;
use crate::special::chi2_sf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub stat: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Likelihood-ratio test of `reduced` nested in `full`. Small negative
/// statistics from optimizer noise are clamped to zero.
pub fn lrt(full: &FittedModel, reduced: &FittedModel, df: u32) -> Result<LrtResult, GlmmError> {
    if df == 0 {
        return Err(GlmmError::NotNested(df));
    }
    let raw = 2.0 * (full.loglik - reduced.loglik);
    if raw.is_nan() {
        return Err(GlmmError::NonFinite);
    }
    let stat = raw.max(0.0);
    Ok(LrtResult {
        stat,
        df,
        p_value: chi2_sf(stat, df),
    })
}

/// Predicted WER of `level`:
/// `exp(beta0 + beta_level + beta_logref * xbar) / (exp(xbar) - 1)`.
pub fn predict_group_wer(model: &FittedModel, level: &str, xbar: f64) -> Result<f64, GlmmError> {
    if !(xbar > 0.0) {
        return Err(GlmmError::DegenerateXbar(xbar));
    }
    let beta_g = model
        .beta_g()
        .get(level)
        .copied()
        .ok_or_else(|| GlmmError::UnknownLevel(level.to_string()))?;
    let numerator = (model.beta0() + beta_g + model.beta_logref() * xbar).exp();
    Ok(numerator / xbar.exp_m1())
}
