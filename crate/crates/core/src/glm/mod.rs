//! Gaussian-identity and binomial-logit GLMs fitted by IRLS, plus the
//! likelihood machinery used by the splitting and stopping tests.

mod chisq;
mod design;
mod irls;

pub use chisq::{chisq_sf, gamma_q, ln_gamma, lr_statistic, lr_test, LrTest};
pub use design::{ColumnKind, DesignMatrix};
pub use irls::{fit_glm, GlmFit};

pub(crate) use irls::logistic;

use crate::error::{Error, Result};

/// Relative deviance change that ends IRLS.
pub const IRLS_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;
/// Binomial means are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-10;
/// Unpenalized binomial fits with any |coefficient| above this are separated.
pub const SEPARATION_CAP: f64 = 30.0;
/// Ridge used for stabilized fits (ordering and fallbacks).
pub const DEFAULT_RIDGE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    GaussianIdentity,
    BinomialLogit,
}

impl Family {
    pub fn link(self, mu: f64) -> f64 {
        match self {
            Family::GaussianIdentity => mu,
            Family::BinomialLogit => (mu / (1.0 - mu)).ln(),
        }
    }

    pub fn inverse_link(self, eta: f64) -> f64 {
        match self {
            Family::GaussianIdentity => eta,
            Family::BinomialLogit => logistic(eta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::GaussianIdentity => "gaussian",
            Family::BinomialLogit => "binomial",
        }
    }

    pub(crate) fn validate_response(self, y: &[f64]) -> Result<()> {
        for (i, &v) in y.iter().enumerate() {
            let ok = match self {
                Family::GaussianIdentity => v.is_finite(),
                Family::BinomialLogit => v == 0.0 || v == 1.0,
            };
            if !ok {
                return Err(Error::Domain(format!(
                    "response {i} = {v} is invalid for the {} family",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::GaussianIdentity),
            "binomial" | "binary" | "logit" => Ok(Family::BinomialLogit),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

/// Log-likelihood of `y` at fitted means `mu`.
///
/// Gaussian requires `sigma2 > 0` (the ML variance of the model being
/// scored). Binomial means are clamped away from 0 and 1 first.
pub fn log_likelihood(y: &[f64], mu: &[f64], family: Family, sigma2: Option<f64>) -> Result<f64> {
    if y.len() != mu.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: mu.len(),
        });
    }
    match family {
        Family::GaussianIdentity => {
            let s2 = match sigma2 {
                Some(s) if s > 0.0 && s.is_finite() => s,
                other => {
                    return Err(Error::Domain(format!(
                        "Gaussian log-likelihood needs sigma2 > 0, got {other:?}"
                    )))
                }
            };
            let rss: f64 = y.iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum();
            let n = y.len() as f64;
            Ok(-0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - rss / (2.0 * s2))
        }
        Family::BinomialLogit => {
            let mut ll = 0.0;
            for (&yi, &m) in y.iter().zip(mu) {
                let p = m.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Domain(format!("binomial mean {m} outside (0,1)")));
                }
                ll += yi * p.ln() + (1.0 - yi) * (1.0 - p).ln();
            }
            Ok(ll)
        }
    }
}
