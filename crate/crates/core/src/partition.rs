//! Unit ordering, threshold-indicator designs and reconstruction of the
//! clustering from accepted split points.
//!
//! Thresholds refer to ordering positions: `c` splits the ordered units into
//! positions `1..=c` and `c+1..=n`, and the indicator `I(i > c)` is one for
//! every observation of a unit whose 1-based position exceeds `c`.

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{fit_glm, ColumnKind, DesignMatrix, Family, GlmFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderBasis {
    UnpenalizedMl,
    RidgeMl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitOrder {
    /// `permutation[k]` is the unit at 0-based position `k`.
    permutation: Vec<usize>,
    /// `position[u]` is the 1-based ordering position of unit `u`.
    position: Vec<usize>,
    /// Per-unit intercept estimates that induced the ordering.
    estimates: Vec<f64>,
    basis: OrderBasis,
}

impl UnitOrder {
    /// Orders units ascending by `estimates`, ties by unit index.
    pub fn from_estimates(estimates: Vec<f64>, basis: OrderBasis) -> Result<Self> {
        if estimates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite unit intercept estimate".into()));
        }
        let mut permutation: Vec<usize> = (0..estimates.len()).collect();
        permutation.sort_by(|&a, &b| estimates[a].total_cmp(&estimates[b]).then(a.cmp(&b)));
        let mut position = vec![0; estimates.len()];
        for (k, &u) in permutation.iter().enumerate() {
            position[u] = k + 1;
        }
        Ok(Self {
            permutation,
            position,
            estimates,
            basis,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_estimates(vec![0.0; n], OrderBasis::UnpenalizedMl)
            .expect("zeros are finite")
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// 1-based position of `unit`.
    pub fn position_of(&self, unit: usize) -> usize {
        self.position[unit]
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn basis(&self) -> OrderBasis {
        self.basis
    }
}

/// Orders units by their intercept estimates in the full fixed-effects model.
///
/// The unpenalized model uses one dummy per unit. If it cannot be fitted the
/// model is refitted as global intercept plus unit dummies with ridge
/// `ridge` on the dummies (and covariates), which shrinks unit effects towards
/// the common level instead of towards an arbitrary reference unit.
pub fn order_units(
    data: &Dataset,
    family: Family,
    shared_covariates: bool,
    ridge: f64,
) -> Result<UnitOrder> {
    let n = data.n_units();
    let plain = unit_dummy_design(data, shared_covariates, false)?;
    match fit_glm(data.y(), &plain, family, 0.0) {
        Ok(fit) => {
            let est = (0..n)
                .map(|u| fit.coefficient(ColumnKind::UnitDummy(u)).unwrap_or(0.0))
                .collect();
            UnitOrder::from_estimates(est, OrderBasis::UnpenalizedMl)
        }
        Err(Error::RankDeficient | Error::Separation { .. }) => {
            let ridge_design = unit_dummy_design(data, shared_covariates, true)?;
            let fit = fit_glm(data.y(), &ridge_design, family, ridge)?;
            let base = fit.coefficient(ColumnKind::Intercept).unwrap_or(0.0);
            let est = (0..n)
                .map(|u| base + fit.coefficient(ColumnKind::UnitDummy(u)).unwrap_or(0.0))
                .collect();
            UnitOrder::from_estimates(est, OrderBasis::RidgeMl)
        }
        Err(e) => Err(e),
    }
}

/// Covariates followed by (optionally a global intercept and) one dummy per unit.
pub fn unit_dummy_design(
    data: &Dataset,
    shared_covariates: bool,
    with_intercept: bool,
) -> Result<DesignMatrix> {
    let n_obs = data.n_obs();
    let p = if shared_covariates { data.n_covariates() } else { 0 };
    let offset = p + usize::from(with_intercept);
    let mut x = DMatrix::zeros(n_obs, offset + data.n_units());
    let mut kinds: Vec<ColumnKind> = (0..p).map(ColumnKind::Covariate).collect();
    if p > 0 {
        x.columns_mut(0, p).copy_from(data.covariates());
    }
    if with_intercept {
        x.column_mut(p).fill(1.0);
        kinds.push(ColumnKind::Intercept);
    }
    kinds.extend((0..data.n_units()).map(ColumnKind::UnitDummy));
    for (obs, &u) in data.unit_of().iter().enumerate() {
        x[(obs, offset + u)] = 1.0;
    }
    DesignMatrix::new(x, kinds)
}

/// Covariates, global intercept, one indicator per active threshold (in the
/// given order) and optionally the candidate threshold's indicator.
pub fn expand_design(
    data: &Dataset,
    order: &UnitOrder,
    active: &[usize],
    candidate: Option<usize>,
) -> Result<DesignMatrix> {
    let n = data.n_units();
    if order.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: order.len(),
        });
    }
    let mut thresholds: Vec<usize> = active.to_vec();
    if let Some(c) = candidate {
        thresholds.push(c);
    }
    let mut seen = vec![false; n];
    for &c in &thresholds {
        if c == 0 || c >= n {
            return Err(Error::ThresholdOutOfRange {
                threshold: c,
                max: n.saturating_sub(1),
            });
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::DuplicateThreshold(c));
        }
    }

    let p = data.n_covariates();
    let n_obs = data.n_obs();
    let mut x = DMatrix::zeros(n_obs, p + 1 + thresholds.len());
    if p > 0 {
        x.columns_mut(0, p).copy_from(data.covariates());
    }
    x.column_mut(p).fill(1.0);
    let positions: Vec<usize> = data
        .unit_of()
        .iter()
        .map(|&u| order.position_of(u))
        .collect();
    for (k, &c) in thresholds.iter().enumerate() {
        for (v, &pos) in x.column_mut(p + 1 + k).iter_mut().zip(&positions) {
            if pos > c {
                *v = 1.0;
            }
        }
    }
    let mut kinds: Vec<ColumnKind> = (0..p).map(ColumnKind::Covariate).collect();
    kinds.push(ColumnKind::Intercept);
    kinds.extend(thresholds.iter().map(|&c| ColumnKind::Threshold(c)));
    DesignMatrix::new(x, kinds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    order: UnitOrder,
    boundaries: Vec<usize>,
    cluster_of: Vec<usize>,
}

impl Partition {
    /// Contiguous blocks of `order` cut after each boundary position.
    pub fn new(order: UnitOrder, boundaries: &[usize]) -> Result<Self> {
        let n = order.len();
        let mut sorted = boundaries.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateThreshold(w[0]));
            }
        }
        if let Some(&c) = sorted.iter().find(|&&c| c == 0 || c >= n) {
            return Err(Error::ThresholdOutOfRange {
                threshold: c,
                max: n.saturating_sub(1),
            });
        }
        let cluster_of = (0..n)
            .map(|u| {
                let pos = order.position_of(u);
                sorted.iter().filter(|&&c| pos > c).count()
            })
            .collect();
        Ok(Self {
            order,
            boundaries: sorted,
            cluster_of,
        })
    }

    pub fn order(&self) -> &UnitOrder {
        &self.order
    }

    /// Sorted cut positions.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// 0-based cluster of each unit; clusters are numbered along the ordering.
    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn n_clusters(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Units of each cluster, listed in ordering position.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for &u in self.order.permutation() {
            out[self.cluster_of[u]].push(u);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterIntercepts {
    pub values: Vec<f64>,
}

impl ClusterIntercepts {
    /// Per-unit intercepts, broadcasting each cluster's value.
    pub fn per_unit(&self, partition: &Partition) -> Vec<f64> {
        partition
            .cluster_of()
            .iter()
            .map(|&k| self.values[k])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finalized {
    pub partition: Partition,
    pub intercepts: ClusterIntercepts,
    pub shared: Vec<f64>,
}

/// Turns the accepted split points and the last refit into the clustering.
///
/// `final_fit` must come from `expand_design(.., accepted, None)`; cluster `k`
/// gets the global intercept plus the increments of the `k` smallest
/// accepted thresholds.
pub fn finalize(order: &UnitOrder, accepted: &[usize], final_fit: &GlmFit) -> Result<Finalized> {
    let partition = Partition::new(order.clone(), accepted)?;
    let base = final_fit
        .coefficient(ColumnKind::Intercept)
        .ok_or_else(|| Error::InvalidArgument("final fit has no global intercept".into()))?;
    let mut values = Vec::with_capacity(partition.n_clusters());
    values.push(base);
    for &c in partition.boundaries() {
        let inc = final_fit
            .coefficient(ColumnKind::Threshold(c))
            .ok_or_else(|| Error::InvalidArgument(format!("final fit lacks threshold {c}")))?;
        values.push(values.last().copied().unwrap_or(base) + inc);
    }
    Ok(Finalized {
        partition,
        intercepts: ClusterIntercepts { values },
        shared: final_fit.shared_coefficients(),
    })
}

/// Covariates followed by one dummy per cluster (no global intercept).
pub fn cluster_design(data: &Dataset, cluster_of: &[usize], n_clusters: usize) -> Result<DesignMatrix> {
    if cluster_of.len() != data.n_units() {
        return Err(Error::LengthMismatch {
            expected: data.n_units(),
            found: cluster_of.len(),
        });
    }
    let p = data.n_covariates();
    let mut x = DMatrix::zeros(data.n_obs(), p + n_clusters);
    if p > 0 {
        x.columns_mut(0, p).copy_from(data.covariates());
    }
    for (obs, &u) in data.unit_of().iter().enumerate() {
        let k = cluster_of[u];
        if k >= n_clusters {
            return Err(Error::InvalidArgument(format!("cluster {k} >= {n_clusters}")));
        }
        x[(obs, p + k)] = 1.0;
    }
    let mut kinds: Vec<ColumnKind> = (0..p).map(ColumnKind::Covariate).collect();
    kinds.extend((0..n_clusters).map(ColumnKind::ClusterDummy));
    DesignMatrix::new(x, kinds)
}
