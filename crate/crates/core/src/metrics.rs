//! Evaluation criteria and replication aggregation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Full fixed-effects GLM, one intercept per unit.
    Gfm,
    /// Tree-structured clustering.
    Tsc,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Gfm => "GFM",
            Method::Tsc => "TSC",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "GFM" | "gfm" => Ok(Method::Gfm),
            "TSC" | "tsc" => Ok(Method::Tsc),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationMetrics {
    pub method: Method,
    pub mse_intercepts: f64,
    pub mse_linear: f64,
    pub n_clusters: usize,
}

fn mean_squared_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty coefficient vector".into()));
    }
    let sse: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sse / truth.len() as f64)
}

/// `1/n * sum_i (est_i - true_i)^2` over unit intercepts.
pub fn mse_intercepts(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    mean_squared_error(estimate, truth)
}

/// Mean squared error of the shared (linear-term) coefficients.
pub fn mse_linear(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    mean_squared_error(estimate, truth)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Spread {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p10: quantile_type7(&sorted, 0.1),
            p90: quantile_type7(&sorted, 0.9),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub method: Method,
    /// Replications that contributed.
    pub reps: usize,
    pub mse_intercepts: Spread,
    pub mse_linear: Spread,
    pub n_clusters: Spread,
}

/// Per-method means (and 10/90 percentiles) over replications, methods in
/// order of first appearance.
pub fn summarize_cell(replications: &[ReplicationMetrics]) -> Result<Vec<CellSummary>> {
    if replications.is_empty() {
        return Err(Error::InvalidArgument("no replications to summarize".into()));
    }
    let mut methods: Vec<Method> = Vec::new();
    for r in replications {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    Ok(methods
        .into_iter()
        .map(|method| {
            let reps: Vec<&ReplicationMetrics> =
                replications.iter().filter(|r| r.method == method).collect();
            let col = |f: fn(&ReplicationMetrics) -> f64| -> Vec<f64> {
                reps.iter().map(|r| f(r)).collect()
            };
            CellSummary {
                method,
                reps: reps.len(),
                mse_intercepts: Spread::of(&col(|r| r.mse_intercepts)),
                mse_linear: Spread::of(&col(|r| r.mse_linear)),
                n_clusters: Spread::of(&col(|r| r.n_clusters as f64)),
            }
        })
        .collect())
}

/// Type-7 (linear interpolation) quantile of ascending `sorted`.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
