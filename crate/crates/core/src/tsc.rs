//! Tree-structured clustering of unit-specific intercepts.
//!
//! Units are ordered once by their fixed-effects intercept estimates. Each
//! step first tests the current clustered model against the full
//! fixed-effects model (`n - step` degrees of freedom); if that global test
//! is significant at `alpha`, the threshold whose indicator yields the
//! largest likelihood-ratio statistic against the current model is added.
//! All coefficients are refitted after every accepted split.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{
    chisq_sf, fit_glm, lr_statistic, lr_test, ColumnKind, DesignMatrix, Family, GlmFit,
    DEFAULT_RIDGE,
};
use crate::partition::{
    expand_design, finalize, order_units, ClusterIntercepts, Partition, UnitOrder,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    /// Significance level of the global stopping test.
    pub alpha: f64,
    /// Cap on accepted splits; `None` means `n - 1`.
    pub max_splits: Option<usize>,
    pub ridge_ordering: f64,
    /// Ridge used when an unpenalized candidate, current or full fit fails.
    pub ridge_fallback: f64,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            alpha: 0.05,
            max_splits: None,
            ridge_ordering: DEFAULT_RIDGE,
            ridge_fallback: DEFAULT_RIDGE,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_max_splits(mut self, max_splits: Option<usize>) -> Self {
        self.max_splits = max_splits;
        self
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge_ordering = ridge;
        self.ridge_fallback = ridge;
        self
    }

    pub fn validate(&self, n_units: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if let Some(m) = self.max_splits {
            if m > n_units.saturating_sub(1) {
                return Err(Error::InvalidArgument(format!(
                    "max_splits {m} exceeds n - 1 = {}",
                    n_units.saturating_sub(1)
                )));
            }
        }
        for (name, r) in [("ridge_ordering", self.ridge_ordering), ("ridge_fallback", self.ridge_fallback)] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateStat {
    pub threshold: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitRecord {
    pub step: usize,
    pub chosen_threshold: usize,
    pub candidate_stats: Vec<CandidateStat>,
    pub global_stat: f64,
    pub global_df: usize,
    pub global_p: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeFit {
    pub spec: ModelSpec,
    pub order: UnitOrder,
    pub partition: Partition,
    pub cluster_intercepts: ClusterIntercepts,
    pub shared_beta: Vec<f64>,
    /// Thresholds in acceptance order.
    pub accepted: Vec<usize>,
    /// Row `s` holds every unit's intercept after `s` accepted splits.
    pub path: Vec<Vec<f64>>,
    pub records: Vec<SplitRecord>,
    /// Log-likelihood after each accepted split, starting with the
    /// single-intercept model.
    pub step_log_likelihoods: Vec<f64>,
    pub final_log_likelihood: f64,
    /// Whether the full fixed-effects model needed the fallback ridge.
    pub full_model_penalized: bool,
}

impl TreeFit {
    pub fn n_clusters(&self) -> usize {
        self.partition.n_clusters()
    }

    /// Fitted intercept of every unit (original unit index).
    pub fn unit_intercepts(&self) -> Vec<f64> {
        self.cluster_intercepts.per_unit(&self.partition)
    }
}

/// Fits with ridge 0, retrying with `ridge` if the design is rank deficient
/// or the binomial fit separates.
pub fn fit_with_fallback(y: &[f64], x: &DesignMatrix, family: Family, ridge: f64) -> Result<GlmFit> {
    match fit_glm(y, x, family, 0.0) {
        Err(Error::RankDeficient | Error::Separation { .. }) if ridge > 0.0 => {
            fit_glm(y, x, family, ridge)
        }
        other => other,
    }
}

pub fn fit_tsc(data: &Dataset, spec: &ModelSpec) -> Result<TreeFit> {
    let n = data.n_units();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "tree-structured clustering needs at least 2 units, got {n}"
        )));
    }
    spec.validate(n)?;
    let family = spec.family;
    let y = data.y();
    // The ordering model is the full unit-dummy model.
    let order = order_units(data, family, true, spec.ridge_ordering).map_err(|e| match e {
        Error::RankDeficient | Error::Separation { .. } => Error::FullModelUnfit(e.to_string()),
        other => other,
    })?;
    let fit_model = |active: &[usize], candidate: Option<usize>| -> Result<GlmFit> {
        let x = expand_design(data, &order, active, candidate)?;
        fit_with_fallback(y, &x, family, spec.ridge_fallback)
    };

    let all: Vec<usize> = (1..n).collect();
    let full_design = expand_design(data, &order, &all, None)?;
    let (full, full_model_penalized) = match fit_glm(y, &full_design, family, 0.0) {
        Ok(f) => (f, false),
        Err(Error::RankDeficient | Error::Separation { .. }) => {
            match fit_glm(y, &full_design, family, spec.ridge_fallback) {
                Ok(f) if spec.ridge_fallback > 0.0 => (f, true),
                Ok(_) => return Err(Error::FullModelUnfit("no fallback ridge configured".into())),
                Err(e) => return Err(Error::FullModelUnfit(e.to_string())),
            }
        }
        Err(e) => return Err(e),
    };

    let budget = spec.max_splits.unwrap_or(n - 1).min(n - 1);
    let mut active: Vec<usize> = Vec::new();
    let mut current = fit_model(&active, None)?;
    let mut path = vec![unit_intercepts(&order, &current)];
    let mut step_log_likelihoods = vec![current.log_likelihood];
    let mut records = Vec::new();

    for step in 1..=budget {
        // Global test: the current model against the full one. When the full
        // model needed the ridge, the current model is scored the same way.
        let null_fit = if full_model_penalized && current.ridge == 0.0 {
            let x = expand_design(data, &order, &active, None)?;
            fit_glm(y, &x, family, spec.ridge_fallback)?
        } else {
            current.clone()
        };
        let global_df = n - step;
        let global = lr_test(&null_fit, &full, global_df as u32)?;

        let candidates: Vec<usize> = (1..n).filter(|c| !active.contains(c)).collect();
        let fits: Vec<Result<GlmFit>> = candidates
            .par_iter()
            .map(|&c| fit_model(&active, Some(c)))
            .collect();
        let mut candidate_stats = Vec::with_capacity(candidates.len());
        let mut best: Option<(usize, f64, GlmFit)> = None;
        for (&c, fit) in candidates.iter().zip(fits) {
            let fit = fit?;
            let statistic = lr_statistic(current.log_likelihood, fit.log_likelihood);
            candidate_stats.push(CandidateStat {
                threshold: c,
                statistic,
                p_value: chisq_sf(statistic, 1),
            });
            if best.as_ref().is_none_or(|(_, t, _)| statistic > *t) {
                best = Some((c, statistic, fit));
            }
        }
        let (chosen, _, chosen_fit) = best.expect("at least one candidate remains below the budget");
        let accepted = global.p_value < spec.alpha;
        records.push(SplitRecord {
            step,
            chosen_threshold: chosen,
            candidate_stats,
            global_stat: global.statistic,
            global_df,
            global_p: global.p_value,
            accepted,
        });
        if !accepted {
            break;
        }
        active.push(chosen);
        current = chosen_fit;
        path.push(unit_intercepts(&order, &current));
        step_log_likelihoods.push(current.log_likelihood);
    }

    let finalized = finalize(&order, &active, &current)?;
    Ok(TreeFit {
        spec: spec.clone(),
        order,
        partition: finalized.partition,
        cluster_intercepts: finalized.intercepts,
        shared_beta: finalized.shared,
        accepted: active,
        path,
        records,
        final_log_likelihood: current.log_likelihood,
        step_log_likelihoods,
        full_model_penalized,
    })
}

/// Per-unit intercepts implied by a threshold-indicator fit.
fn unit_intercepts(order: &UnitOrder, fit: &GlmFit) -> Vec<f64> {
    let base = fit.coefficient(ColumnKind::Intercept).unwrap_or(0.0);
    let increments: Vec<(usize, f64)> = fit
        .columns
        .iter()
        .zip(&fit.coefficients)
        .filter_map(|(k, &b)| match k {
            ColumnKind::Threshold(c) => Some((*c, b)),
            _ => None,
        })
        .collect();
    (0..order.len())
        .map(|u| {
            let pos = order.position_of(u);
            base + increments
                .iter()
                .filter(|(c, _)| pos > *c)
                .map(|(_, a)| a)
                .sum::<f64>()
        })
        .collect()
}

/// Coefficient path in tabular form.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    /// `rows[s][u]`: intercept of unit `u` after `s` accepted splits.
    pub rows: Vec<Vec<f64>>,
    /// `clusters[s][u]`: cluster of unit `u` after `s` accepted splits.
    pub clusters: Vec<Vec<usize>>,
}

impl PathTable {
    pub fn n_steps(&self) -> usize {
        self.rows.len()
    }

    /// Whether each step's clustering refines the previous one.
    pub fn is_refining(&self) -> bool {
        self.clusters.windows(2).all(|w| {
            let (coarse, fine) = (&w[0], &w[1]);
            // every fine cluster maps into exactly one coarse cluster
            let mut parent = std::collections::HashMap::new();
            fine.iter()
                .zip(coarse)
                .all(|(f, c)| *parent.entry(*f).or_insert(*c) == *c)
        })
    }
}

pub fn path_table(fit: &TreeFit) -> Result<PathTable> {
    let clusters = (0..fit.path.len())
        .map(|s| Partition::new(fit.order.clone(), &fit.accepted[..s]).map(|p| p.cluster_of().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok(PathTable {
        rows: fit.path.clone(),
        clusters,
    })
}
