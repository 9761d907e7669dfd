//! Long-format clustered observations.
//!
//! Each observation belongs to one unit (school, community, person, ...) and
//! carries a response plus a row of shared covariates. Units are indexed
//! `0..n_units` in the order they were declared; that index is the "original
//! unit index" used for deterministic tie-breaking downstream.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    unit_labels: Vec<String>,
    unit: Vec<usize>,
    y: Vec<f64>,
    covariates: DMatrix<f64>,
    covariate_names: Vec<String>,
    obs_by_unit: Vec<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset with `n_units` units labelled `"1"..="n"`.
    ///
    /// `covariates` is `N x p` (use `p = 0` for an intercept-only model).
    pub fn new(
        n_units: usize,
        unit: Vec<usize>,
        y: Vec<f64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let labels = (1..=n_units).map(|i| i.to_string()).collect();
        Self::with_labels(labels, unit, y, covariates, covariate_names)
    }

    pub fn with_labels(
        unit_labels: Vec<String>,
        unit: Vec<usize>,
        y: Vec<f64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n_obs = y.len();
        if unit.len() != n_obs {
            return Err(Error::LengthMismatch {
                expected: n_obs,
                found: unit.len(),
            });
        }
        if covariates.nrows() != n_obs {
            return Err(Error::DimensionMismatch(format!(
                "covariate matrix has {} rows, expected {n_obs}",
                covariates.nrows()
            )));
        }
        if covariate_names.len() != covariates.ncols() {
            return Err(Error::LengthMismatch {
                expected: covariates.ncols(),
                found: covariate_names.len(),
            });
        }
        let n_units = unit_labels.len();
        let mut obs_by_unit = vec![Vec::new(); n_units];
        for (obs, &u) in unit.iter().enumerate() {
            if u >= n_units {
                return Err(Error::InvalidArgument(format!(
                    "observation {obs} refers to unit {u} but only {n_units} units exist"
                )));
            }
            obs_by_unit[u].push(obs);
        }
        if let Some(empty) = obs_by_unit.iter().position(Vec::is_empty) {
            return Err(Error::EmptyUnit(empty));
        }
        Ok(Self {
            unit_labels,
            unit,
            y,
            covariates,
            covariate_names,
            obs_by_unit,
        })
    }

    /// Builds a dataset from arbitrary unit labels; units are numbered by
    /// first appearance.
    pub fn from_labeled<S: AsRef<str>>(
        labels: &[S],
        y: Vec<f64>,
        covariates: DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let mut index = std::collections::HashMap::new();
        let mut unit_labels = Vec::new();
        let unit = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                *index.entry(l.to_string()).or_insert_with(|| {
                    unit_labels.push(l.to_string());
                    unit_labels.len() - 1
                })
            })
            .collect();
        Self::with_labels(unit_labels, unit, y, covariates, covariate_names)
    }

    pub fn n_units(&self) -> usize {
        self.unit_labels.len()
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn unit_of(&self) -> &[usize] {
        &self.unit
    }

    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn unit_labels(&self) -> &[String] {
        &self.unit_labels
    }

    pub fn observations_of(&self, unit: usize) -> &[usize] {
        &self.obs_by_unit[unit]
    }

    pub fn unit_sizes(&self) -> Vec<usize> {
        self.obs_by_unit.iter().map(Vec::len).collect()
    }

    /// Builds a new dataset from a list of drawn units. Every draw becomes a
    /// fresh unit carrying all observations of the source unit, so a unit
    /// drawn twice appears as two distinct units.
    pub fn resample_units(&self, draws: &[usize]) -> Result<Self> {
        let p = self.n_covariates();
        let total: usize = draws
            .iter()
            .map(|&u| self.obs_by_unit.get(u).map_or(0, Vec::len))
            .sum();
        let mut unit = Vec::with_capacity(total);
        let mut y = Vec::with_capacity(total);
        let mut cov = Vec::with_capacity(total * p);
        let mut labels = Vec::with_capacity(draws.len());
        for (new_id, &src) in draws.iter().enumerate() {
            let obs = self.obs_by_unit.get(src).ok_or_else(|| {
                Error::InvalidArgument(format!("resample draw refers to unknown unit {src}"))
            })?;
            labels.push(format!("{}#{new_id}", self.unit_labels[src]));
            for &o in obs {
                unit.push(new_id);
                y.push(self.y[o]);
                cov.extend(self.covariates.row(o).iter().copied());
            }
        }
        let covariates = DMatrix::from_row_slice(total, p, &cov);
        Self::with_labels(labels, unit, y, covariates, self.covariate_names.clone())
    }

    /// Renumbers units: unit `u` becomes unit `mapping[u]`. Observation order
    /// is kept.
    pub fn relabel_units(&self, mapping: &[usize]) -> Result<Self> {
        let n = self.n_units();
        if mapping.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: mapping.len(),
            });
        }
        let mut labels = vec![String::new(); n];
        for (old, &new) in mapping.iter().enumerate() {
            if new >= n {
                return Err(Error::InvalidArgument(format!("mapping target {new} >= {n}")));
            }
            labels[new] = self.unit_labels[old].clone();
        }
        let unit = self.unit.iter().map(|&u| mapping[u]).collect();
        Self::with_labels(
            labels,
            unit,
            self.y.clone(),
            self.covariates.clone(),
            self.covariate_names.clone(),
        )
    }
}
