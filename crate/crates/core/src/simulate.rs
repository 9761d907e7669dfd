//! Data-generating processes for the Monte-Carlo study.
//!
//! Intercepts are drawn from a normal or a shifted chi-squared distribution,
//! sorted, cut into `m0` balanced blocks and replaced by their block means.
//! The continuous covariate can be correlated with the (fused) intercepts;
//! the binary covariate is independent Bernoulli(0.5).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Bernoulli, ChiSquared, Distribution, Normal, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{logistic, Family};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterceptDist {
    Normal { mean: f64, variance: f64 },
    /// `chi2(df)` shifted so that its expectation is `mean`.
    ChiSquared { df: f64, mean: f64 },
}

impl InterceptDist {
    pub fn mean(&self) -> f64 {
        match *self {
            InterceptDist::Normal { mean, .. } | InterceptDist::ChiSquared { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InterceptDist::Normal { variance, .. } => variance,
            InterceptDist::ChiSquared { df, .. } => 2.0 * df,
        }
    }

    fn sampler(&self) -> Result<Sampler> {
        match *self {
            InterceptDist::Normal { mean, variance } => Normal::new(mean, variance.sqrt())
                .map(Sampler::Normal)
                .map_err(|e| Error::InvalidArgument(format!("normal intercepts: {e}"))),
            InterceptDist::ChiSquared { df, mean } => ChiSquared::new(df)
                .map(|d| Sampler::Chi(d, mean - df))
                .map_err(|e| Error::InvalidArgument(format!("chi-squared intercepts: {e}"))),
        }
    }
}

enum Sampler {
    Normal(Normal<f64>),
    Chi(ChiSquared<f64>, f64),
}

impl Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Chi(d, shift) => d.sample(rng) + shift,
        }
    }
}

/// Shape of the intercept distribution, with family-specific parameters
/// filled in by [`Scenario::paper`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistKind {
    Normal,
    ChiSquared,
}

impl std::str::FromStr for DistKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "norm" | "gaussian" => Ok(DistKind::Normal),
            "chisq" | "chi2" | "chisquared" | "chi-squared" => Ok(DistKind::ChiSquared),
            other => Err(Error::InvalidArgument(format!("unknown intercept distribution '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub family: Family,
    pub n: usize,
    pub n_i: usize,
    pub m0: usize,
    pub rho: f64,
    pub intercept_dist: InterceptDist,
    pub beta: [f64; 2],
    /// Residual SD, Gaussian response only.
    pub sigma_eps: f64,
    pub seed: u64,
}

impl Scenario {
    /// Study defaults. Gaussian: intercepts N(0,1) or centred chi2(0.5),
    /// beta = (2, 2), sigma_eps = 3. Binary: N(-0.8, 4) or chi2(2) shifted to
    /// mean -0.8, beta = (0.1, 0.1).
    pub fn paper(family: Family, n: usize, n_i: usize, m0: usize, rho: f64, dist: DistKind) -> Self {
        let (intercept_dist, beta) = match (family, dist) {
            (Family::GaussianIdentity, DistKind::Normal) => {
                (InterceptDist::Normal { mean: 0.0, variance: 1.0 }, [2.0, 2.0])
            }
            (Family::GaussianIdentity, DistKind::ChiSquared) => {
                (InterceptDist::ChiSquared { df: 0.5, mean: 0.0 }, [2.0, 2.0])
            }
            (Family::BinomialLogit, DistKind::Normal) => {
                (InterceptDist::Normal { mean: -0.8, variance: 4.0 }, [0.1, 0.1])
            }
            (Family::BinomialLogit, DistKind::ChiSquared) => {
                (InterceptDist::ChiSquared { df: 2.0, mean: -0.8 }, [0.1, 0.1])
            }
        };
        Self {
            family,
            n,
            n_i,
            m0,
            rho,
            intercept_dist,
            beta,
            sigma_eps: 3.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_i == 0 {
            return Err(Error::InvalidArgument("n and n_i must be positive".into()));
        }
        if self.m0 == 0 || self.m0 > self.n {
            return Err(Error::InvalidM0 { m0: self.m0, n: self.n });
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (-1,1), got {}", self.rho)));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidArgument("sigma_eps must be >= 0".into()));
        }
        self.intercept_dist.sampler().map(|_| ())
    }

    /// Flat `key=value` block, one key per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let (dist, df, mu, s2) = match self.intercept_dist {
            InterceptDist::Normal { mean, variance } => ("normal", None, mean, variance),
            InterceptDist::ChiSquared { df, mean } => ("chisq", Some(df), mean, 2.0 * df),
        };
        let _ = writeln!(s, "family={}", self.family.name());
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "n_i={}", self.n_i);
        let _ = writeln!(s, "m0={}", self.m0);
        let _ = writeln!(s, "rho={}", self.rho);
        let _ = writeln!(s, "intercept_dist={dist}");
        if let Some(df) = df {
            let _ = writeln!(s, "df={df}");
        }
        let _ = writeln!(s, "mu_b={mu}");
        let _ = writeln!(s, "sigma_b2={s2}");
        let _ = writeln!(s, "sigma_eps={}", self.sigma_eps);
        let _ = writeln!(s, "beta1={}", self.beta[0]);
        let _ = writeln!(s, "beta2={}", self.beta[1]);
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }

    /// Parses a block written by [`Scenario::to_kv`]. Missing keys fall back
    /// to the study defaults for the given family and distribution.
    pub fn from_kv(text: &str) -> Result<Self> {
        let map = parse_kv(text)?;
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
            map.get(key)
                .map(|v| {
                    v.parse::<T>()
                        .map_err(|_| Error::InvalidArgument(format!("invalid value '{v}' for {key}")))
                })
                .transpose()
        }
        let family: Family = get(map, "family")?.unwrap_or(Family::GaussianIdentity);
        let kind: DistKind = get(map, "intercept_dist")?.unwrap_or(DistKind::Normal);
        let n = get(map, "n")?.ok_or_else(|| Error::InvalidArgument("missing key n".into()))?;
        let n_i = get(map, "n_i")?.ok_or_else(|| Error::InvalidArgument("missing key n_i".into()))?;
        let m0 = get(map, "m0")?.unwrap_or(5);
        let rho = get(map, "rho")?.unwrap_or(0.0);
        let mut s = Scenario::paper(family, n, n_i, m0, rho, kind);
        let mu: Option<f64> = get(map, "mu_b")?;
        let s2: Option<f64> = get(map, "sigma_b2")?;
        let df: Option<f64> = get(map, "df")?;
        s.intercept_dist = match s.intercept_dist {
            InterceptDist::Normal { mean, variance } => InterceptDist::Normal {
                mean: mu.unwrap_or(mean),
                variance: s2.unwrap_or(variance),
            },
            InterceptDist::ChiSquared { df: d0, mean } => InterceptDist::ChiSquared {
                df: df.or(s2.map(|v| v / 2.0)).unwrap_or(d0),
                mean: mu.unwrap_or(mean),
            },
        };
        if let Some(v) = get(map, "sigma_eps")? {
            s.sigma_eps = v;
        }
        if let Some(v) = get(map, "beta1")? {
            s.beta[0] = v;
        }
        if let Some(v) = get(map, "beta2")? {
            s.beta[1] = v;
        }
        if let Some(v) = get(map, "seed")? {
            s.seed = v;
        }
        s.validate()?;
        Ok(s)
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Input {
            line: i + 1,
            message: format!("expected key=value, got '{line}'"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Fused intercepts, indexed by unit. Units are numbered in ascending order
/// of their raw draw.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedIntercepts {
    /// Sorted raw draws.
    pub raw: Vec<f64>,
    pub fused: Vec<f64>,
    pub cluster: Vec<usize>,
}

/// Sorts `raw`, cuts it into `m0` blocks whose sizes differ by at most one,
/// and replaces every value by its block mean.
pub fn fuse_intercepts(raw: &[f64], m0: usize) -> Result<FusedIntercepts> {
    let n = raw.len();
    if m0 == 0 || m0 > n {
        return Err(Error::InvalidM0 { m0, n });
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut fused = vec![0.0; n];
    let mut cluster = vec![0; n];
    for k in 0..m0 {
        let (lo, hi) = (k * n / m0, (k + 1) * n / m0);
        let mean = sorted[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
        fused[lo..hi].fill(mean);
        cluster[lo..hi].fill(k);
    }
    Ok(FusedIntercepts {
        raw: sorted,
        fused,
        cluster,
    })
}

pub fn gen_intercepts<R: Rng + ?Sized>(
    n: usize,
    m0: usize,
    dist: &InterceptDist,
    rng: &mut R,
) -> Result<FusedIntercepts> {
    if m0 == 0 || m0 > n {
        return Err(Error::InvalidM0 { m0, n });
    }
    let sampler = dist.sampler()?;
    let raw: Vec<f64> = (0..n).map(|_| sampler.sample(rng)).collect();
    fuse_intercepts(&raw, m0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

/// Draws `x1 ~ N(0,1)` and `x2 ~ B(1, 0.5)` for `n_i` observations per unit
/// (unit-major order), then replaces `x1` by `rho * z_i + sqrt(1 - rho^2) * x1`
/// with `z_i` the unit's intercept standardized by the empirical mean and
/// (population) SD over units.
pub fn gen_covariates<R: Rng + ?Sized>(
    intercepts: &[f64],
    n_i: usize,
    rho: f64,
    rng: &mut R,
) -> Result<Covariates> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho must lie in (-1,1), got {rho}")));
    }
    let n = intercepts.len();
    let total = n * n_i;
    let mut x1: Vec<f64> = (0..total).map(|_| rng.sample(StandardNormal)).collect();
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let x2: Vec<f64> = (0..total).map(|_| f64::from(coin.sample(rng))).collect();
    if rho != 0.0 {
        let (mean, var) = moments(intercepts);
        let sd = var.sqrt();
        if !(sd > 1e-12) {
            return Err(Error::ZeroVariance);
        }
        let keep = (1.0 - rho * rho).sqrt();
        for (obs, v) in x1.iter_mut().enumerate() {
            let z = (intercepts[obs / n_i] - mean) / sd;
            *v = rho * z + keep * *v;
        }
    }
    Ok(Covariates { x1, x2 })
}

/// Responses for unit-major observations with `n_i` per unit.
#[allow(clippy::too_many_arguments)]
pub fn gen_response<R: Rng + ?Sized>(
    intercepts: &[f64],
    n_i: usize,
    covariates: &Covariates,
    beta: [f64; 2],
    family: Family,
    sigma_eps: f64,
    rng: &mut R,
) -> Vec<f64> {
    (0..intercepts.len() * n_i)
        .map(|obs| {
            let eta = intercepts[obs / n_i] + beta[0] * covariates.x1[obs] + beta[1] * covariates.x2[obs];
            match family {
                Family::GaussianIdentity => {
                    let e: f64 = rng.sample(StandardNormal);
                    eta + sigma_eps * e
                }
                Family::BinomialLogit => f64::from(rng.random_bool(logistic(eta))),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: Dataset,
    pub true_unit_intercepts: Vec<f64>,
    /// Pre-fusion draws (sorted, so aligned with units).
    pub raw_intercepts: Vec<f64>,
    pub true_partition: Vec<usize>,
    pub true_beta: [f64; 2],
}

impl SimulatedData {
    /// `(mean, variance)` of the raw and of the fused intercepts.
    pub fn intercept_moments(&self) -> ((f64, f64), (f64, f64)) {
        (moments(&self.raw_intercepts), moments(&self.true_unit_intercepts))
    }
}

/// One replication of a scenario, drawn from stream `replication` of the
/// scenario seed.
pub fn simulate(scenario: &Scenario, replication: u64) -> Result<SimulatedData> {
    scenario.validate()?;
    let mut rng = stream_rng(scenario.seed, replication);
    let intercepts = gen_intercepts(scenario.n, scenario.m0, &scenario.intercept_dist, &mut rng)?;
    let cov = gen_covariates(&intercepts.fused, scenario.n_i, scenario.rho, &mut rng)?;
    let y = gen_response(
        &intercepts.fused,
        scenario.n_i,
        &cov,
        scenario.beta,
        scenario.family,
        scenario.sigma_eps,
        &mut rng,
    );
    let total = y.len();
    let mut x = DMatrix::zeros(total, 2);
    for obs in 0..total {
        x[(obs, 0)] = cov.x1[obs];
        x[(obs, 1)] = cov.x2[obs];
    }
    let unit = (0..total).map(|obs| obs / scenario.n_i).collect();
    let dataset = Dataset::new(scenario.n, unit, y, x, vec!["x1".into(), "x2".into()])?;
    Ok(SimulatedData {
        dataset,
        true_unit_intercepts: intercepts.fused,
        raw_intercepts: intercepts.raw,
        true_partition: intercepts.cluster,
        true_beta: scenario.beta,
    })
}

/// Effective degrees of freedom of random intercepts in a linear random
/// intercept model: `(n - 1) n_i / (n_i + sigma_eps2 / sigma_b2)`.
pub fn effective_df(n: usize, n_i: usize, sigma_eps2: f64, sigma_b2: f64) -> f64 {
    let n_i = n_i as f64;
    (n as f64 - 1.0) * n_i / (n_i + sigma_eps2 / sigma_b2)
}

/// Mean and population variance.
pub fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}
