use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::{Column, Design};
use super::GlmmError;
use crate::special::ln_factorial;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    /// Profile the random-intercept SD over `[0, sigma_upper]`.
    Estimate,
    /// Hold it at a fixed value (0 gives a plain Poisson GLM).
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub sigma: SigmaMode,
    pub sigma_upper: f64,
    pub sigma_tol: f64,
    pub inner_tol: f64,
    pub max_inner_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            sigma: SigmaMode::Estimate,
            sigma_upper: 5.0,
            sigma_tol: 1e-4,
            inner_tol: 1e-8,
            max_inner_iter: 100,
        }
    }
}

impl FitOptions {
    pub fn fixed_sigma(sigma: f64) -> Self {
        Self {
            sigma: SigmaMode::Fixed(sigma),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub columns: Vec<Column>,
    pub coefficients: Vec<f64>,
    pub reference_level: Option<String>,
    pub sigma_u: f64,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    /// Euclidean norm of the gradient of the Laplace objective in the fixed
    /// effects at the returned estimate.
    pub grad_norm: f64,
}

impl FittedModel {
    fn coefficient(&self, col: &Column) -> Option<f64> {
        self.columns
            .iter()
            .position(|c| c == col)
            .map(|k| self.coefficients[k])
    }

    pub fn beta0(&self) -> f64 {
        self.coefficient(&Column::Intercept).unwrap_or(0.0)
    }

    /// Coefficient on the centered `log N` covariate (0 when absent).
    pub fn beta_logref(&self) -> f64 {
        self.coefficient(&Column::LogRefLen).unwrap_or(0.0)
    }

    /// Level coefficients; the reference level maps to exactly 0.
    pub fn beta_g(&self) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> = self
            .columns
            .iter()
            .zip(&self.coefficients)
            .filter_map(|(c, &b)| match c {
                Column::Level(name) => Some((name.clone(), b)),
                _ => None,
            })
            .collect();
        if let Some(r) = &self.reference_level {
            out.insert(r.clone(), 0.0);
        }
        out
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            beta0: self.beta0(),
            beta: self.beta_g(),
            beta_logref: self.beta_logref(),
            sigma_u: self.sigma_u,
            loglik: self.loglik,
            converged: self.converged,
            n_iter: self.n_iter,
        }
    }
}

/// Flat coefficient dump for cross-checking against other software.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub beta0: f64,
    pub beta: BTreeMap<String, f64>,
    pub beta_logref: f64,
    pub sigma_u: f64,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
}

/// Per-design precomputation shared by every objective evaluation.
struct Problem<'a> {
    design: &'a Design,
    ln_fact: f64,
    group_y: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(design: &'a Design) -> Self {
        let mut group_y = vec![0.0; design.n_groups];
        for (i, &y) in design.response.iter().enumerate() {
            group_y[design.groups[i]] += y;
        }
        Self {
            design,
            ln_fact: design.response.iter().map(|&y| ln_factorial(y)).sum(),
            group_y,
        }
    }

    fn fixed_predictor(&self, beta: &[f64]) -> Vec<f64> {
        let d = self.design;
        (0..d.n_rows())
            .map(|i| d.offset[i] + d.row(i).iter().zip(beta).map(|(x, b)| x * b).sum::<f64>())
            .collect()
    }

    /// Solves for the conditional modes of the standardized random effects
    /// `b_j = u_j / sigma` given the fixed predictor.
    fn update_modes(&self, eta_fixed: &[f64], sigma: f64, b: &mut [f64]) -> Result<(), GlmmError> {
        if sigma == 0.0 {
            b.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let mut exp_sum = vec![0.0; self.design.n_groups];
        for (i, &e) in eta_fixed.iter().enumerate() {
            exp_sum[self.design.groups[i]] += e.exp();
        }
        for (j, bj) in b.iter_mut().enumerate() {
            let (ys, es) = (self.group_y[j], exp_sum[j]);
            if !es.is_finite() {
                return Err(GlmmError::NonFinite);
            }
            let objective = |v: f64| sigma * v * ys - (sigma * v).exp() * es - 0.5 * v * v;
            let mut v = *bj;
            for _ in 0..100 {
                let m = (sigma * v).exp() * es;
                let g = sigma * (ys - m) - v;
                if g.abs() <= 1e-12 * (1.0 + sigma * ys) {
                    break;
                }
                let h = sigma * sigma * m + 1.0;
                let mut step = g / h;
                let here = objective(v);
                let mut next = v + step;
                let mut halvings = 0;
                while !(objective(next) >= here) && halvings < 60 {
                    step *= 0.5;
                    next = v + step;
                    halvings += 1;
                }
                if next == v {
                    break;
                }
                v = next;
            }
            if !v.is_finite() {
                return Err(GlmmError::NonFinite);
            }
            *bj = v;
        }
        Ok(())
    }

    /// Laplace log-likelihood at `(beta, sigma)` with modes `b`, its
    /// gradient in `beta` and the (positive definite) information matrix of
    /// the profiled penalized objective.
    fn evaluate(&self, eta_fixed: &[f64], sigma: f64, b: &[f64]) -> Result<Evaluation, GlmmError> {
        let d = self.design;
        let p = d.n_cols();
        let mut loglik = -self.ln_fact;
        let mut grad = vec![0.0; p];
        let mut info = DMatrix::<f64>::zeros(p, p);
        let mut group_mu = vec![0.0; d.n_groups];
        let mut group_mx = vec![0.0; d.n_groups * p];

        for i in 0..d.n_rows() {
            let j = d.groups[i];
            let eta = eta_fixed[i] + sigma * b[j];
            let mu = eta.exp();
            let y = d.response[i];
            loglik += y * eta - mu;
            let x = d.row(i);
            let r = y - mu;
            for a in 0..p {
                grad[a] += r * x[a];
                group_mx[j * p + a] += mu * x[a];
                for c in 0..=a {
                    info[(a, c)] += mu * x[a] * x[c];
                }
            }
            group_mu[j] += mu;
        }

        let s2 = sigma * sigma;
        for j in 0..d.n_groups {
            let h = 1.0 + s2 * group_mu[j];
            loglik -= 0.5 * b[j] * b[j] + 0.5 * h.ln();
            if s2 > 0.0 {
                let m = &group_mx[j * p..(j + 1) * p];
                for a in 0..p {
                    grad[a] -= 0.5 * s2 * m[a] / (h * h);
                    for c in 0..=a {
                        info[(a, c)] -= s2 * m[a] * m[c] / h;
                    }
                }
            }
        }
        for a in 0..p {
            for c in 0..a {
                info[(c, a)] = info[(a, c)];
            }
        }

        if !loglik.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(GlmmError::NonFinite);
        }
        Ok(Evaluation { loglik, grad, info })
    }
}

struct Evaluation {
    loglik: f64,
    grad: Vec<f64>,
    info: DMatrix<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn newton_direction(info: &DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let g = DVector::from_column_slice(grad);
    if let Some(chol) = info.clone().cholesky() {
        return chol.solve(&g).iter().copied().collect();
    }
    // fall back to a ridged system, then to steepest ascent
    let scale = (0..info.nrows()).map(|k| info[(k, k)].abs()).fold(1e-12, f64::max);
    let mut ridged = info.clone();
    for k in 0..ridged.nrows() {
        ridged[(k, k)] += 1e-6 * scale;
    }
    match ridged.cholesky() {
        Some(chol) => chol.solve(&g).iter().copied().collect(),
        None => grad.iter().map(|g| g / scale).collect(),
    }
}

#[derive(Debug, Clone)]
struct InnerFit {
    beta: Vec<f64>,
    b: Vec<f64>,
    loglik: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

/// Maximizes the Laplace objective over the fixed effects at fixed sigma.
fn fit_at_sigma(
    problem: &Problem<'_>,
    sigma: f64,
    mut beta: Vec<f64>,
    mut b: Vec<f64>,
    opts: &FitOptions,
) -> Result<InnerFit, GlmmError> {
    let eta = problem.fixed_predictor(&beta);
    problem.update_modes(&eta, sigma, &mut b)?;
    let mut current = problem.evaluate(&eta, sigma, &b)?;
    let mut gnorm = norm(&current.grad);
    let mut iterations = 0;

    while gnorm > opts.inner_tol && iterations < opts.max_inner_iter {
        iterations += 1;
        let direction = newton_direction(&current.info, &current.grad);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial_beta: Vec<f64> = beta.iter().zip(&direction).map(|(x, d)| x + t * d).collect();
            let trial_eta = problem.fixed_predictor(&trial_beta);
            let mut trial_b = b.clone();
            let attempt = problem
                .update_modes(&trial_eta, sigma, &mut trial_b)
                .and_then(|_| problem.evaluate(&trial_eta, sigma, &trial_b));
            if let Ok(trial) = attempt {
                let trial_norm = norm(&trial.grad);
                let slack = 1e-11 * (1.0 + current.loglik.abs());
                let better = trial.loglik > current.loglik
                    || (trial.loglik >= current.loglik - slack && trial_norm < gnorm);
                if better {
                    accepted = Some((trial_beta, trial_b, trial, trial_norm));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((nb, nbm, ev, n)) => {
                beta = nb;
                b = nbm;
                current = ev;
                gnorm = n;
            }
            None => break,
        }
    }

    Ok(InnerFit {
        beta,
        b,
        loglik: current.loglik,
        grad_norm: gnorm,
        iterations,
        converged: gnorm <= opts.inner_tol,
    })
}

fn starting_beta(design: &Design) -> Vec<f64> {
    let y: f64 = design.response.iter().sum();
    let exposure: f64 = design.offset.iter().map(|o| o.exp()).sum();
    let mut beta = vec![0.0; design.n_cols()];
    if let Some(k) = design.columns.iter().position(|c| *c == Column::Intercept) {
        beta[k] = (y.max(0.5) / exposure).ln();
    }
    beta
}

/// Fits the random-intercept Poisson model by maximizing the Laplace
/// approximation to the marginal likelihood.
///
/// Hitting an iteration cap yields `converged == false` rather than an error.
pub fn fit_poisson_glmm(design: &Design, opts: &FitOptions) -> Result<FittedModel, GlmmError> {
    if design.n_rows() == 0 {
        return Err(GlmmError::EmptyDesign);
    }
    let problem = Problem::new(design);
    let beta0 = starting_beta(design);
    let b0 = vec![0.0; design.n_groups];

    let mode = if design.n_groups < 2 {
        SigmaMode::Fixed(0.0)
    } else {
        opts.sigma
    };

    let (best, sigma, n_iter, outer_ok) = match mode {
        SigmaMode::Fixed(sigma) => {
            let fit = fit_at_sigma(&problem, sigma.max(0.0), beta0, b0, opts)?;
            let it = fit.iterations;
            (fit, sigma.max(0.0), it, true)
        }
        SigmaMode::Estimate => {
            let at_zero = fit_at_sigma(&problem, 0.0, beta0, b0, opts)?;
            let mut best = (0.0, at_zero);
            let eval = |s: f64, best: &mut (f64, InnerFit)| -> Result<f64, GlmmError> {
                let fit = fit_at_sigma(&problem, s, best.1.beta.clone(), best.1.b.clone(), opts)?;
                let ll = fit.loglik;
                if ll > best.1.loglik {
                    *best = (s, fit);
                }
                Ok(ll)
            };

            let (mut lo, mut hi) = (0.0, opts.sigma_upper);
            let mut c = hi - GOLDEN * (hi - lo);
            let mut d = lo + GOLDEN * (hi - lo);
            let mut fc = eval(c, &mut best)?;
            let mut fd = eval(d, &mut best)?;
            let mut iterations = 0;
            while hi - lo > opts.sigma_tol && iterations < 200 {
                iterations += 1;
                if fc >= fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - GOLDEN * (hi - lo);
                    fc = eval(c, &mut best)?;
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + GOLDEN * (hi - lo);
                    fd = eval(d, &mut best)?;
                }
            }
            let (sigma, fit) = best;
            (fit, sigma, iterations, hi - lo <= opts.sigma_tol)
        }
    };

    Ok(FittedModel {
        columns: design.columns.clone(),
        coefficients: best.beta,
        reference_level: if design.attribute_df() > 0 {
            design.reference_level().map(str::to_owned)
        } else {
            None
        },
        sigma_u: sigma,
        loglik: best.loglik,
        converged: best.converged && outer_ok,
        n_iter,
        grad_norm: best.grad_norm,
    })
}

/// Laplace-approximate marginal log-likelihood of `model` on `design`.
pub fn log_likelihood(model: &FittedModel, design: &Design) -> Result<f64, GlmmError> {
    if model.columns.len() != design.n_cols() || model.columns != design.columns {
        return Err(GlmmError::DimensionMismatch {
            model: model.columns.len(),
            design: design.n_cols(),
        });
    }
    let problem = Problem::new(design);
    let eta = problem.fixed_predictor(&model.coefficients);
    let mut b = vec![0.0; design.n_groups];
    problem.update_modes(&eta, model.sigma_u, &mut b)?;
    Ok(problem.evaluate(&eta, model.sigma_u, &b)?.loglik)
}
