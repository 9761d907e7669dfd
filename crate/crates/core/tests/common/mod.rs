#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use tsclust::glm::{fit_glm, ColumnKind};
use tsclust::partition::{cluster_design, expand_design};
use tsclust::tsc::path_table;
use tsclust::{fit_tsc, Dataset, Family, ModelSpec, TreeFit};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Units with the given intercepts and `sizes[u]` observations each, plus
/// `p` standard-normal covariates with coefficients `beta`.
pub fn planted(
    intercepts: &[f64],
    sizes: &[usize],
    beta: &[f64],
    family: Family,
    sd: f64,
    rng: &mut ChaCha8Rng,
) -> Dataset {
    let p = beta.len();
    let mut unit = Vec::new();
    let mut y = Vec::new();
    let mut cov = Vec::new();
    for (u, (&a, &m)) in intercepts.iter().zip(sizes).enumerate() {
        for _ in 0..m {
            let x: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let eta = a + x.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>();
            let v = match family {
                Family::GaussianIdentity => eta + sd * rng.sample::<f64, _>(StandardNormal),
                Family::BinomialLogit => f64::from(rng.random_bool(1.0 / (1.0 + (-eta).exp()))),
            };
            unit.push(u);
            y.push(v);
            cov.extend(x);
        }
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::new(
        intercepts.len(),
        unit,
        y.clone(),
        DMatrix::from_row_slice(y.len(), p, &cov),
        names,
    )
    .unwrap()
}

/// Intercept-only Gaussian data, `n_i` observations per unit.
pub fn gaussian_means(means: &[f64], n_i: usize, sd: f64, rng: &mut ChaCha8Rng) -> Dataset {
    planted(means, &vec![n_i; means.len()], &[], Family::GaussianIdentity, sd, rng)
}

/// Least squares through a plain QR of the full design.
pub fn lstsq(x: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    qr.r().solve_upper_triangular(&qty).expect("full rank")
}

/// Dense Newton-Raphson for ridge-penalized logistic regression, penalty
/// `ridge / 2 * |b|^2` on every coefficient with index in `penalized`.
pub fn logistic_newton(x: &DMatrix<f64>, y: &[f64], ridge: f64, penalized: &[usize]) -> DVector<f64> {
    let p = x.ncols();
    let mut b = DVector::zeros(p);
    for _ in 0..200 {
        let eta = x * &b;
        let mu = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
        let mut grad = x.transpose() * (DVector::from_column_slice(y) - &mu);
        let w = mu.map(|m| m * (1.0 - m));
        let mut h = x.transpose() * DMatrix::from_diagonal(&w) * x;
        for &j in penalized {
            grad[j] -= ridge * b[j];
            h[(j, j)] += ridge;
        }
        let step = h.lu().solve(&grad).expect("non-singular Hessian");
        b += &step;
        if step.amax() < 1e-14 {
            break;
        }
    }
    b
}

/// Residual sum of squares of grouping the values `ybar` (with weights `w`)
/// by `groups`, each group fitted by its weighted mean.
pub fn grouped_rss(ybar: &[f64], w: &[f64], groups: &[usize], k: usize) -> f64 {
    let mut sum = vec![0.0; k];
    let mut wt = vec![0.0; k];
    for ((&v, &wi), &g) in ybar.iter().zip(w).zip(groups) {
        sum[g] += wi * v;
        wt[g] += wi;
    }
    ybar.iter()
        .zip(w)
        .zip(groups)
        .map(|((&v, &wi), &g)| wi * (v - sum[g] / wt[g]).powi(2))
        .sum()
}

/// The best two-group partition of the units of an intercept-only Gaussian
/// dataset by exhaustive search over all `2^(n-1) - 1` splits. Returns the
/// membership (unit 0 always in group 0) and its RSS.
pub fn best_two_partition(data: &Dataset) -> (Vec<usize>, f64) {
    let n = data.n_units();
    let (ybar, w) = unit_means(data);
    let mut best = (Vec::new(), f64::INFINITY);
    for mask in 1u64..(1 << (n - 1)) {
        let groups: Vec<usize> = (0..n)
            .map(|u| if u == 0 { 0 } else { ((mask >> (u - 1)) & 1) as usize })
            .collect();
        let rss = grouped_rss(&ybar, &w, &groups, 2);
        if rss < best.1 {
            best = (groups, rss);
        }
    }
    best
}

pub fn unit_means(data: &Dataset) -> (Vec<f64>, Vec<f64>) {
    (0..data.n_units())
        .map(|u| {
            let obs = data.observations_of(u);
            let s: f64 = obs.iter().map(|&o| data.y()[o]).sum();
            (s / obs.len() as f64, obs.len() as f64)
        })
        .unzip()
}

/// Two memberships describe the same partition up to renaming.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut fwd = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            *fwd.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x
        })
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// A random small instance for the invariant checks.
pub fn random_instance(seed: u64) -> (Dataset, ModelSpec) {
    let mut r = rng(seed);
    let binomial = r.random_bool(0.3);
    let family = if binomial {
        Family::BinomialLogit
    } else {
        Family::GaussianIdentity
    };
    let n = r.random_range(2..=12);
    let n_clusters = r.random_range(1..=n.min(4));
    let spread = if binomial { 1.0 } else { r.random_range(0.0..3.0) };
    let levels: Vec<f64> = (0..n_clusters)
        .map(|_| spread * r.sample::<f64, _>(StandardNormal))
        .collect();
    let intercepts: Vec<f64> = (0..n).map(|_| levels[r.random_range(0..n_clusters)]).collect();
    let sizes: Vec<usize> = (0..n)
        .map(|_| if binomial { r.random_range(25..=40) } else { r.random_range(3..=15) })
        .collect();
    let p = r.random_range(0..=2);
    let beta: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
    let data = planted(&intercepts, &sizes, &beta, family, 1.0, &mut r);
    let alpha = [0.05, 0.3, 0.8][r.random_range(0..3)];
    (data, ModelSpec::new(family).with_alpha(alpha))
}

/// Checks refinement, nesting, label invariance, determinism and the
/// cluster-dummy round trip for one instance.
pub fn check_invariants(data: &Dataset, spec: &ModelSpec, seed: u64) -> Result<(), String> {
    let fit = fit_tsc(data, spec).map_err(|e| format!("fit failed: {e}"))?;
    let n = data.n_units();

    // Partition structure.
    let members = fit.partition.members();
    if members.iter().map(Vec::len).sum::<usize>() != n {
        return Err("cluster sizes do not sum to n".into());
    }
    let perm = fit.order.permutation();
    let mut start = 0;
    for m in &members {
        if m[..] != perm[start..start + m.len()] {
            return Err("cluster is not a contiguous block of the ordering".into());
        }
        start += m.len();
    }

    // Refinement of the path.
    let table = path_table(&fit).map_err(|e| e.to_string())?;
    if !table.is_refining() {
        return Err("path clusters are not nested refinements".into());
    }
    if table.n_steps() != fit.accepted.len() + 1 {
        return Err("path length differs from accepted splits + 1".into());
    }
    let first = &table.rows[0];
    if first.iter().any(|v| (v - first[0]).abs() > 1e-12 * (1.0 + first[0].abs())) {
        return Err("path step 0 is not constant".into());
    }
    let last = table.rows.last().unwrap();
    for (a, b) in last.iter().zip(fit.unit_intercepts()) {
        if (a - b).abs() > 1e-12 * (1.0 + b.abs()) {
            return Err("last path row differs from the final intercepts".into());
        }
    }

    // Nesting.
    for w in fit.step_log_likelihoods.windows(2) {
        if w[1] < w[0] - 1e-8 * (1.0 + w[0].abs()) {
            return Err(format!("log-likelihood decreased: {} -> {}", w[0], w[1]));
        }
    }

    // Record bookkeeping.
    let accepted = fit.records.iter().filter(|r| r.accepted).count();
    if accepted != fit.accepted.len() || fit.records.len() > accepted + 1 {
        return Err("records do not match accepted splits".into());
    }
    for r in &fit.records {
        if r.global_df != n - r.step {
            return Err("global df is not n - step".into());
        }
        let max_t = r.candidate_stats.iter().map(|c| c.statistic).fold(f64::NEG_INFINITY, f64::max);
        let chosen = r.candidate_stats.iter().find(|c| c.threshold == r.chosen_threshold).unwrap();
        if chosen.statistic != max_t {
            return Err("chosen threshold does not attain the maximal statistic".into());
        }
    }

    // Determinism, including across thread counts.
    let again = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| fit_tsc(data, spec))
        .map_err(|e| e.to_string())?;
    if again != fit {
        return Err("refit is not bit-identical".into());
    }

    // Label invariance.
    let mut r = rng(seed ^ 0x5eed);
    let mut mapping: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        mapping.swap(i, r.random_range(0..=i));
    }
    let relabeled = data.relabel_units(&mapping).map_err(|e| e.to_string())?;
    let fit2 = fit_tsc(&relabeled, spec).map_err(|e| e.to_string())?;
    let moved: Vec<usize> = (0..n).map(|u| fit2.partition.cluster_of()[mapping[u]]).collect();
    if !same_partition(&moved, fit.partition.cluster_of()) {
        return Err("partition changed under relabeling".into());
    }
    let est1: Vec<f64> = fit.order.permutation().iter().map(|&u| fit.order.estimates()[u]).collect();
    let est2: Vec<f64> = fit2.order.permutation().iter().map(|&u| fit2.order.estimates()[u]).collect();
    for (a, b) in est1.iter().zip(&est2) {
        if (a - b).abs() > 1e-6 * (1.0 + a.abs()) {
            return Err("ordered estimates changed under relabeling".into());
        }
    }

    round_trip(data, &fit)
}

/// Refitting on cluster dummies reproduces the incremental intercepts when
/// the tree's final model is unpenalized.
pub fn round_trip(data: &Dataset, fit: &TreeFit) -> Result<(), String> {
    let family = fit.spec.family;
    let x = expand_design(data, &fit.order, &fit.accepted, None).map_err(|e| e.to_string())?;
    if fit_glm(data.y(), &x, family, 0.0).is_err() {
        return Ok(());
    }
    let tol = match family {
        Family::GaussianIdentity => 1e-8,
        Family::BinomialLogit => 1e-6,
    };
    let xc = cluster_design(data, fit.partition.cluster_of(), fit.n_clusters()).map_err(|e| e.to_string())?;
    let refit = fit_glm(data.y(), &xc, family, 0.0).map_err(|e| format!("cluster refit: {e}"))?;
    for (k, v) in fit.cluster_intercepts.values.iter().enumerate() {
        let w = refit.coefficient(ColumnKind::ClusterDummy(k)).unwrap();
        if (v - w).abs() > tol * (1.0 + w.abs()) {
            return Err(format!("cluster {k}: incremental {v} vs refit {w}"));
        }
    }
    for (a, b) in fit.shared_beta.iter().zip(refit.shared_coefficients()) {
        if (a - b).abs() > tol * (1.0 + b.abs()) {
            return Err(format!("shared coefficient {a} vs refit {b}"));
        }
    }
    Ok(())
}

/// Draws from `N(mean, sd^2)`.
pub fn normal_draws(n: usize, mean: f64, sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = Normal::new(mean, sd).unwrap();
    (0..n).map(|_| d.sample(rng)).collect()
}

/// Kolmogorov-Smirnov test of `x` against N(0,1): `(D, asymptotic p)`.
pub fn ks_standard_normal(x: &[f64]) -> (f64, f64) {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    (d, p.clamp(0.0, 1.0))
}

/// Standard normal CDF via the complementary error function
/// (Numerical Recipes `erfcc`, relative error below 1.2e-7).
pub fn normal_cdf(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.5 * z);
    let erfc = t * (-z * z - 1.26551223
        + t * (1.00002368
            + t * (0.37409196
                + t * (0.09678418
                    + t * (-0.18628806
                        + t * (0.27886807
                            + t * (-1.13520398 + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        1.0 - 0.5 * erfc
    } else {
        0.5 * erfc
    }
}
