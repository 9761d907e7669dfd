//! Unit-level nonparametric bootstrap with percentile intervals.
//!
//! Each replicate draws `n` units with replacement (a unit drawn twice
//! enters twice under distinct ids) and refits the whole tree. Shared
//! coefficients are comparable across replicates; clusters are not, so the
//! cluster-intercept intervals hold the original partition fixed and refit
//! its cluster-dummy GLM on every replicate.

use rand::Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::ColumnKind;
use crate::metrics::quantile_type7;
use crate::partition::cluster_design;
use crate::rng::stream_rng;
use crate::tsc::{fit_tsc, fit_with_fallback, ModelSpec, TreeFit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub level: f64,
    pub parameter_names: Vec<String>,
    /// Shared coefficients of the original fit.
    pub estimates: Vec<f64>,
    /// Successful replicates x shared coefficients.
    pub replicates: Vec<Vec<f64>>,
    pub intervals: Vec<Interval>,
    pub cluster_estimates: Vec<f64>,
    /// Successful replicates x clusters of the original partition; `NaN`
    /// where a cluster had no drawn unit.
    pub cluster_replicates: Vec<Vec<f64>>,
    pub cluster_intervals: Vec<Interval>,
    pub n_failed: usize,
}

impl BootstrapResult {
    /// Percentile intervals of the stored replicates at another level.
    pub fn intervals_at(&self, level: f64) -> (Vec<Interval>, Vec<Interval>) {
        (
            percentile_intervals(&self.replicates, self.estimates.len(), level),
            percentile_intervals(&self.cluster_replicates, self.cluster_estimates.len(), level),
        )
    }
}

/// `b` lists of `n_units` unit draws, replicate `i` from stream `i` of `seed`.
pub fn resample_draws(n_units: usize, b: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..b)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            (0..n_units).map(|_| rng.random_range(0..n_units)).collect()
        })
        .collect()
}

pub fn bootstrap_ci(data: &Dataset, spec: &ModelSpec, b: usize, level: f64, seed: u64) -> Result<BootstrapResult> {
    validate(b, level)?;
    let original = fit_tsc(data, spec)?;
    let draws = resample_draws(data.n_units(), b, seed);
    bootstrap_from_draws(data, spec, &original, &draws, level)
}

fn validate(b: usize, level: f64) -> Result<()> {
    if b < 2 {
        return Err(Error::InvalidArgument(format!("bootstrap needs B >= 2, got {b}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0,1), got {level}")));
    }
    Ok(())
}

/// Bootstrap over explicit unit draws.
pub fn bootstrap_from_draws(
    data: &Dataset,
    spec: &ModelSpec,
    original: &TreeFit,
    draws: &[Vec<usize>],
    level: f64,
) -> Result<BootstrapResult> {
    validate(draws.len(), level)?;
    let n_clusters = original.n_clusters();
    let outcomes: Vec<Option<(Vec<f64>, Vec<f64>)>> = draws
        .par_iter()
        .map(|draw| replicate(data, spec, original, draw).ok())
        .collect();
    let n_failed = outcomes.iter().filter(|o| o.is_none()).count();
    if 2 * n_failed > draws.len() {
        return Err(Error::TooManyFailures {
            failed: n_failed,
            total: draws.len(),
        });
    }
    let (replicates, cluster_replicates): (Vec<_>, Vec<_>) = outcomes.into_iter().flatten().unzip();
    let p = original.shared_beta.len();
    Ok(BootstrapResult {
        level,
        parameter_names: data.covariate_names().to_vec(),
        estimates: original.shared_beta.clone(),
        intervals: percentile_intervals(&replicates, p, level),
        cluster_intervals: percentile_intervals(&cluster_replicates, n_clusters, level),
        replicates,
        cluster_estimates: original.cluster_intercepts.values.clone(),
        cluster_replicates,
        n_failed,
    })
}

fn replicate(data: &Dataset, spec: &ModelSpec, original: &TreeFit, draw: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let sample = data.resample_units(draw)?;
    let tree = fit_tsc(&sample, spec)?;

    // Original clusters present in this draw, compacted to 0..k.
    let n_clusters = original.n_clusters();
    let source_cluster = original.partition.cluster_of();
    let mut compact = vec![usize::MAX; n_clusters];
    let mut present = Vec::new();
    for &u in draw {
        let k = source_cluster[u];
        if compact[k] == usize::MAX {
            compact[k] = present.len();
            present.push(k);
        }
    }
    let cluster_of: Vec<usize> = draw.iter().map(|&u| compact[source_cluster[u]]).collect();
    let x = cluster_design(&sample, &cluster_of, present.len())?;
    let fit = fit_with_fallback(sample.y(), &x, spec.family, spec.ridge_fallback)?;
    let mut cluster_values = vec![f64::NAN; n_clusters];
    for (j, &k) in present.iter().enumerate() {
        cluster_values[k] = fit
            .coefficient(ColumnKind::ClusterDummy(j))
            .unwrap_or(f64::NAN);
    }
    Ok((tree.shared_beta, cluster_values))
}

fn percentile_intervals(replicates: &[Vec<f64>], n_params: usize, level: f64) -> Vec<Interval> {
    let gamma = 1.0 - level;
    (0..n_params)
        .map(|j| {
            let mut values: Vec<f64> = replicates
                .iter()
                .map(|r| r[j])
                .filter(|v| v.is_finite())
                .collect();
            if values.is_empty() {
                return Interval {
                    lower: f64::NAN,
                    upper: f64::NAN,
                };
            }
            values.sort_by(f64::total_cmp);
            Interval {
                lower: quantile_type7(&values, gamma / 2.0),
                upper: quantile_type7(&values, 1.0 - gamma / 2.0),
            }
        })
        .collect()
}
