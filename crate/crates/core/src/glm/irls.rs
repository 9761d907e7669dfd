//! Iteratively reweighted least squares for the two supported families.
//!
//! Ridge convention: the fit maximizes `l(beta) - ridge/2 * sum_j beta_j^2`
//! over all columns except the global intercept (Gaussian: minimizes
//! `RSS + ridge * sum_j beta_j^2`). Every IRLS step solves the weighted,
//! penalized normal equations with a column-pivoted QR after Jacobi scaling,
//! and a pivot that collapses relative to the largest one is reported as rank
//! deficiency rather than silently regularized.

use nalgebra::{DMatrix, DVector};

use super::design::{ColumnKind, DesignMatrix};
use super::{Family, IRLS_TOLERANCE, MAX_ITERATIONS, PROB_FLOOR, SEPARATION_CAP};
use crate::error::{Error, Result};

/// Relative pivot size below which the normal equations count as singular.
const RANK_TOLERANCE: f64 = 1e-11;
/// Coefficient-step criterion for binomial convergence, relative to `1 + max|beta|`.
const STEP_TOLERANCE: f64 = 1e-7;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    /// Unpenalized log-likelihood at `coefficients`.
    pub log_likelihood: f64,
    pub deviance: f64,
    pub converged: bool,
    pub iterations: usize,
    /// ML residual variance `RSS / N`; Gaussian only.
    pub sigma2_hat: Option<f64>,
    pub ridge: f64,
    pub fitted: Vec<f64>,
    pub columns: Vec<ColumnKind>,
}

impl GlmFit {
    pub fn coefficient(&self, kind: ColumnKind) -> Option<f64> {
        self.columns
            .iter()
            .position(|&k| k == kind)
            .map(|j| self.coefficients[j])
    }

    /// Coefficients of the shared covariates, in column order.
    pub fn shared_coefficients(&self) -> Vec<f64> {
        self.columns
            .iter()
            .zip(&self.coefficients)
            .filter(|(k, _)| matches!(k, ColumnKind::Covariate(_)))
            .map(|(_, &b)| b)
            .collect()
    }
}

pub fn fit_glm(y: &[f64], x: &DesignMatrix, family: Family, ridge: f64) -> Result<GlmFit> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "response has {} entries, design has {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    if x.ncols() == 0 {
        return Err(Error::DimensionMismatch("design has no columns".into()));
    }
    family.validate_response(y)?;
    let penalty: Vec<f64> = x
        .columns()
        .iter()
        .map(|&k| if k == ColumnKind::Intercept { 0.0 } else { ridge })
        .collect();
    match family {
        Family::GaussianIdentity => fit_gaussian(y, x, &penalty, ridge),
        Family::BinomialLogit => fit_binomial(y, x, &penalty, ridge),
    }
}

fn fit_gaussian(y: &[f64], x: &DesignMatrix, penalty: &[f64], ridge: f64) -> Result<GlmFit> {
    let weights = vec![1.0; y.len()];
    let beta = solve_penalized(x.values(), &weights, y, penalty)?;
    let fitted: Vec<f64> = (x.values() * &beta).iter().copied().collect();
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let sigma2 = (rss / y.len() as f64).max(f64::MIN_POSITIVE);
    let log_likelihood = super::log_likelihood(y, &fitted, Family::GaussianIdentity, Some(sigma2))?;
    Ok(GlmFit {
        coefficients: beta.iter().copied().collect(),
        log_likelihood,
        deviance: rss,
        converged: true,
        iterations: 1,
        sigma2_hat: Some(sigma2),
        ridge,
        fitted,
        columns: x.columns().to_vec(),
    })
}

fn fit_binomial(y: &[f64], x: &DesignMatrix, penalty: &[f64], ridge: f64) -> Result<GlmFit> {
    let xv = x.values();
    let p = xv.ncols();
    let mut beta = DVector::zeros(p);
    let mut eta: Vec<f64> = y.iter().map(|&yi| logit((yi + 0.5) / 2.0)).collect();
    let mut mu: Vec<f64> = eta.iter().map(|&e| clamp_prob(logistic(e))).collect();
    let mut pen_dev = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        let w: Vec<f64> = mu.iter().map(|&m| m * (1.0 - m)).collect();
        let z: Vec<f64> = (0..y.len())
            .map(|i| eta[i] + (y[i] - mu[i]) / w[i])
            .collect();
        let mut candidate = solve_penalized(xv, &w, &z, penalty)?;
        let (mut cand_eta, mut cand_mu, mut cand_dev) =
            evaluate_binomial(xv, &candidate, y, penalty);

        // The first step starts from the working response, not from a
        // coefficient vector, so it has nothing to halve towards.
        if iter > 1 {
            let mut halvings = 0;
            while (!cand_dev.is_finite() || cand_dev > pen_dev * (1.0 + 1e-12))
                && halvings < MAX_HALVINGS
            {
                candidate = (&candidate + &beta) * 0.5;
                (cand_eta, cand_mu, cand_dev) = evaluate_binomial(xv, &candidate, y, penalty);
                halvings += 1;
            }
        }

        let max_abs = candidate.amax();
        if ridge == 0.0 && max_abs > SEPARATION_CAP {
            return Err(Error::Separation {
                cap: SEPARATION_CAP,
            });
        }
        if !cand_dev.is_finite() {
            return Err(Error::Domain("binomial deviance is not finite".into()));
        }
        let step = (&candidate - &beta).amax();
        let rel_change = (cand_dev - pen_dev).abs() / (cand_dev.abs() + 0.1);
        beta = candidate;
        eta = cand_eta;
        mu = cand_mu;
        pen_dev = cand_dev;
        if rel_change < IRLS_TOLERANCE && step <= STEP_TOLERANCE * (1.0 + max_abs) {
            converged = true;
            break;
        }
    }

    let log_likelihood = super::log_likelihood(y, &mu, Family::BinomialLogit, None)?;
    Ok(GlmFit {
        coefficients: beta.iter().copied().collect(),
        log_likelihood,
        deviance: -2.0 * log_likelihood,
        converged,
        iterations,
        sigma2_hat: None,
        ridge,
        fitted: mu,
        columns: x.columns().to_vec(),
    })
}

/// Returns `(eta, mu, penalized deviance)` at `beta`.
fn evaluate_binomial(
    x: &DMatrix<f64>,
    beta: &DVector<f64>,
    y: &[f64],
    penalty: &[f64],
) -> (Vec<f64>, Vec<f64>, f64) {
    let eta: Vec<f64> = (x * beta).iter().copied().collect();
    let mu: Vec<f64> = eta.iter().map(|&e| clamp_prob(logistic(e))).collect();
    let dev: f64 = y
        .iter()
        .zip(&mu)
        .map(|(&yi, &m)| -2.0 * (yi * m.ln() + (1.0 - yi) * (1.0 - m).ln()))
        .sum();
    let pen: f64 = penalty
        .iter()
        .zip(beta.iter())
        .map(|(l, b)| l * b * b)
        .sum();
    (eta, mu, dev + pen)
}

/// Solves `(X' W X + diag(penalty)) beta = X' W z`.
pub(crate) fn solve_penalized(
    x: &DMatrix<f64>,
    w: &[f64],
    z: &[f64],
    penalty: &[f64],
) -> Result<DVector<f64>> {
    let (n, p) = x.shape();
    let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let mut xw = x.clone();
    for j in 0..p {
        for (v, s) in xw.column_mut(j).iter_mut().zip(&sqrt_w) {
            *v *= s;
        }
    }
    let zw = DVector::from_iterator(n, z.iter().zip(&sqrt_w).map(|(a, s)| a * s));
    let mut a = xw.tr_mul(&xw);
    let mut b = xw.tr_mul(&zw);
    for j in 0..p {
        a[(j, j)] += penalty[j];
    }

    let mut scale = Vec::with_capacity(p);
    for j in 0..p {
        let d = a[(j, j)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::RankDeficient);
        }
        scale.push(1.0 / d.sqrt());
    }
    for j in 0..p {
        for i in 0..p {
            a[(i, j)] *= scale[i] * scale[j];
        }
        b[j] *= scale[j];
    }

    let qr = a.col_piv_qr();
    let r = qr.r();
    let largest = r[(0, 0)].abs();
    if (0..p).any(|k| !(r[(k, k)].abs() > RANK_TOLERANCE * largest)) {
        return Err(Error::RankDeficient);
    }
    let mut beta = qr.solve(&b).ok_or(Error::RankDeficient)?;
    for j in 0..p {
        beta[j] *= scale[j];
    }
    Ok(beta)
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}
