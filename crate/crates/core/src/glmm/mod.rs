//! Mixed-effects Poisson regression with a per-speaker random intercept.
//!
//! Error counts `y_i` are modelled as
//!
//! ```text
//! y_i ~ Poisson(mu_i),  log mu_i = log N_i + x_i' beta + u_j(i),  u_j ~ N(0, sigma^2)
//! ```
//!
//! so that `log(mu_i / N_i)`, the expected WER, is linear in the fixed
//! effects. The marginal likelihood is integrated over `u` with the Laplace
//! approximation, `sigma` is profiled by golden-section search and the fixed
//! effects are found by a penalized Newton/IRLS iteration.

mod design;
mod fit;
mod lrt;

pub use design::{build_design, Column, Design, DesignRow, DesignSpec, LevelInfo, MERGED_LEVEL};
pub use fit::{fit_poisson_glmm, log_likelihood, FitOptions, FittedModel, ModelSummary, SigmaMode};
pub use lrt::{lrt, predict_group_wer, LrtResult};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlmmError {
    #[error("attribute {0:?} has fewer than two observed levels")]
    SingleLevelAttribute(String),
    #[error("level {0:?} has no errors at all and the continuity correction is disabled")]
    Separation(String),
    #[error("objective became non-finite")]
    NonFinite,
    #[error("model has {model} coefficients but the design has {design} columns")]
    DimensionMismatch { model: usize, design: usize },
    #[error("models are not nested (df = {0})")]
    NotNested(u32),
    #[error("level {0:?} is not part of the model")]
    UnknownLevel(String),
    #[error("mean log reference length {0} must be positive")]
    DegenerateXbar(f64),
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("design has no rows")]
    EmptyDesign,
}
