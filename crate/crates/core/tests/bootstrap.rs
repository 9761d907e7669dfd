mod common;

use common::*;
use tsclust::inference::{bootstrap_ci, bootstrap_from_draws, resample_draws};
use tsclust::{fit_tsc, Family, ModelSpec};

fn planted_data(seed: u64) -> tsclust::Dataset {
    let mut r = rng(seed);
    let levels = [-2.0, -2.0, -2.0, -2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0];
    planted(&levels, &[12; 16], &[1.0], Family::GaussianIdentity, 1.0, &mut r)
}

#[test]
fn percentile_interval_covers_slope() {
    let spec = ModelSpec::new(Family::GaussianIdentity);
    let outer = 100;
    let mut covered = 0;
    for seed in 0..outer {
        let d = planted_data(500 + seed);
        let r = bootstrap_ci(&d, &spec, 200, 0.95, seed).unwrap();
        let iv = r.intervals[0];
        if iv.lower <= 1.0 && 1.0 <= iv.upper {
            covered += 1;
        }
    }
    let rate = covered as f64 / outer as f64;
    assert!((rate - 0.95).abs() <= 0.05, "coverage {rate}");
}

#[test]
fn fixed_seed_is_bit_exact() {
    let d = planted_data(1);
    let spec = ModelSpec::new(Family::GaussianIdentity);
    let a = bootstrap_ci(&d, &spec, 30, 0.9, 99).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| bootstrap_ci(&d, &spec, 30, 0.9, 99).unwrap());
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let c = bootstrap_ci(&d, &spec, 30, 0.9, 100).unwrap();
    assert_ne!(a.replicates, c.replicates);
}

#[test]
fn cluster_intervals_follow_original_partition() {
    let d = planted_data(2);
    let spec = ModelSpec::new(Family::GaussianIdentity);
    let original = fit_tsc(&d, &spec).unwrap();
    let draws = resample_draws(d.n_units(), 50, 5);
    let r = bootstrap_from_draws(&d, &spec, &original, &draws, 0.95).unwrap();
    assert_eq!(r.cluster_estimates.len(), original.n_clusters());
    assert_eq!(r.cluster_intervals.len(), original.n_clusters());
    for (est, iv) in r.cluster_estimates.iter().zip(&r.cluster_intervals) {
        assert!(iv.lower <= iv.upper);
        assert!(iv.lower - 0.5 <= *est && *est <= iv.upper + 0.5);
    }
    assert_eq!(r.replicates.len() + r.n_failed, 50);
}

#[test]
fn binomial_bootstrap_runs() {
    let mut r = rng(3);
    let d = planted(&[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0], &[40; 6], &[0.5], Family::BinomialLogit, 0.0, &mut r);
    let res = bootstrap_ci(&d, &ModelSpec::new(Family::BinomialLogit), 20, 0.9, 4).unwrap();
    assert!(res.intervals[0].lower <= res.intervals[0].upper);
}
