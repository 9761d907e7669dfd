//! Replication driver for simulation cells.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{fit_glm, ColumnKind, Family};
use crate::metrics::{mse_intercepts, mse_linear, summarize_cell, CellSummary, Method, ReplicationMetrics};
use crate::partition::unit_dummy_design;
use crate::simulate::{simulate, Scenario, SimulatedData};
use crate::tsc::{fit_tsc, ModelSpec};

/// Methods run by default: GFM and TSC for Gaussian cells, TSC only for
/// binary cells (the unpenalized fixed-effects fit rarely exists there).
pub fn default_methods(family: Family) -> Vec<Method> {
    match family {
        Family::GaussianIdentity => vec![Method::Gfm, Method::Tsc],
        Family::BinomialLogit => vec![Method::Tsc],
    }
}

/// Estimates of the full fixed-effects model: `(unit intercepts, shared)`.
pub fn fit_gfm(data: &Dataset, family: Family) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = unit_dummy_design(data, true, false)?;
    let fit = fit_glm(data.y(), &x, family, 0.0)?;
    let intercepts = (0..data.n_units())
        .map(|u| fit.coefficient(ColumnKind::UnitDummy(u)).unwrap_or(f64::NAN))
        .collect();
    Ok((intercepts, fit.shared_coefficients()))
}

pub fn evaluate(sim: &SimulatedData, method: Method, spec: &ModelSpec) -> Result<ReplicationMetrics> {
    let (intercepts, shared, n_clusters) = match method {
        Method::Gfm => {
            let (i, s) = fit_gfm(&sim.dataset, spec.family)?;
            (i, s, sim.dataset.n_units())
        }
        Method::Tsc => {
            let fit = fit_tsc(&sim.dataset, spec)?;
            (fit.unit_intercepts(), fit.shared_beta.clone(), fit.n_clusters())
        }
    };
    Ok(ReplicationMetrics {
        method,
        mse_intercepts: mse_intercepts(&intercepts, &sim.true_unit_intercepts)?,
        mse_linear: mse_linear(&shared, &sim.true_beta)?,
        n_clusters,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub replication: u64,
    pub method: Method,
    /// Metrics, or the failure message.
    pub outcome: std::result::Result<ReplicationMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub scenario: Scenario,
    pub methods: Vec<Method>,
    pub reps: usize,
    /// Sorted by replication, then method order.
    pub rows: Vec<ReplicationRow>,
    pub summaries: Vec<CellSummary>,
}

impl CellRun {
    pub fn failures(&self, method: Method) -> usize {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.outcome.is_err())
            .count()
    }

    pub fn summary(&self, method: Method) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// The first method that failed in more than half of the replications.
    pub fn quota_violation(&self) -> Option<Error> {
        self.methods.iter().find_map(|&m| {
            let failed = self.failures(m);
            (2 * failed > self.reps).then(|| Error::SimulationFailures {
                method: m.label().into(),
                failed,
                total: self.reps,
            })
        })
    }
}

/// Runs `reps` replications of `scenario`. The model family is taken from
/// the scenario; the rest of `spec` applies to TSC.
pub fn run_cell(scenario: &Scenario, reps: usize, spec: &ModelSpec, methods: &[Method]) -> Result<CellRun> {
    if reps == 0 {
        return Err(Error::InvalidArgument("at least one replication is required".into()));
    }
    scenario.validate()?;
    let mut spec = spec.clone();
    spec.family = scenario.family;
    let per_rep: Vec<Result<Vec<ReplicationRow>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let sim = simulate(scenario, r)?;
            Ok(methods
                .iter()
                .map(|&m| ReplicationRow {
                    replication: r,
                    method: m,
                    outcome: evaluate(&sim, m, &spec).map_err(|e| e.to_string()),
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::with_capacity(reps * methods.len());
    for r in per_rep {
        rows.extend(r?);
    }
    let ok: Vec<ReplicationMetrics> = rows.iter().filter_map(|r| r.outcome.as_ref().ok().copied()).collect();
    let summaries = if ok.is_empty() { Vec::new() } else { summarize_cell(&ok)? };
    Ok(CellRun {
        scenario: scenario.clone(),
        methods: methods.to_vec(),
        reps,
        rows,
        summaries,
    })
}
