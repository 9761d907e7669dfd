//! Chi-squared tail probabilities through the regularized incomplete gamma
//! function, and the likelihood-ratio test built on them.

use super::irls::GlmFit;
use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;
const FPMIN: f64 = 1e-300;

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma `Q(a, x) = Gamma(a, x) / Gamma(a)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        (1.0 - lower_series(a, x) * log_prefactor.exp()).clamp(0.0, 1.0)
    } else {
        (upper_continued_fraction(a, x) * log_prefactor.exp()).clamp(0.0, 1.0)
    }
}

fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum
}

// Modified Lentz evaluation of the continued fraction for Gamma(a, x).
fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    h
}

/// `P(chi2_df > x)`.
pub fn chisq_sf(x: f64, df: u32) -> f64 {
    assert!(df >= 1, "chi-squared degrees of freedom must be >= 1");
    if x.is_nan() {
        return f64::NAN;
    }
    gamma_q(df as f64 / 2.0, x / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrTest {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Likelihood-ratio statistic clamped at zero, without the negativity check.
pub fn lr_statistic(ll_null: f64, ll_alt: f64) -> f64 {
    (2.0 * (ll_alt - ll_null)).max(0.0)
}

/// Likelihood-ratio test of `fit_null` nested in `fit_alt`.
///
/// A negative raw statistic beyond numerical noise means one of the fits did
/// not reach its optimum; that is reported as `ConvergenceSuspect` when both
/// fits are unpenalized (penalized optima legitimately lose likelihood).
pub fn lr_test(fit_null: &GlmFit, fit_alt: &GlmFit, df: u32) -> Result<LrTest> {
    if df == 0 {
        return Err(Error::InvalidArgument("likelihood-ratio df must be >= 1".into()));
    }
    let raw = 2.0 * (fit_alt.log_likelihood - fit_null.log_likelihood);
    let tolerance = 1e-6 * fit_null.log_likelihood.abs().max(1.0);
    if raw < -tolerance && fit_null.ridge == 0.0 && fit_alt.ridge == 0.0 {
        return Err(Error::ConvergenceSuspect(raw));
    }
    let statistic = raw.max(0.0);
    Ok(LrTest {
        statistic,
        df,
        p_value: chisq_sf(statistic, df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        // ln(9!) = ln 362880
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sf_at_zero_is_one() {
        assert_eq!(chisq_sf(0.0, 5), 1.0);
    }

    #[test]
    fn df2_closed_form() {
        // chi2 with 2 df is exponential with rate 1/2.
        for &x in &[0.1, 1.0, 5.0, 20.0, 100.0] {
            assert!((chisq_sf(x, 2) - (-x / 2.0).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn extreme_tail_saturates() {
        assert_eq!(chisq_sf(1e6, 1), 0.0);
        assert!(chisq_sf(1e-300, 500) == 1.0);
    }

    fn fit_with_ll(ll: f64) -> GlmFit {
        GlmFit {
            coefficients: vec![],
            log_likelihood: ll,
            deviance: -2.0 * ll,
            converged: true,
            iterations: 1,
            sigma2_hat: None,
            ridge: 0.0,
            fitted: vec![],
            columns: vec![],
        }
    }

    #[test]
    fn lr_test_examples() {
        let same = lr_test(&fit_with_ll(-50.0), &fit_with_ll(-50.0), 3).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);

        let t = lr_test(&fit_with_ll(-110.0), &fit_with_ll(-105.0), 1).unwrap();
        assert_eq!(t.statistic, 10.0);
        assert!((t.p_value - 0.001_565).abs() < 1e-6);

        let noise = lr_test(&fit_with_ll(-50.0), &fit_with_ll(-50.0 - 1e-12), 1).unwrap();
        assert_eq!(noise.statistic, 0.0);
        assert_eq!(noise.p_value, 1.0);
    }

    #[test]
    fn lr_test_flags_negative_statistic() {
        let err = lr_test(&fit_with_ll(-50.0), &fit_with_ll(-51.0), 1).unwrap_err();
        assert!(matches!(err, Error::ConvergenceSuspect(_)));
        let mut penalized = fit_with_ll(-51.0);
        penalized.ridge = 1e-4;
        assert_eq!(lr_test(&fit_with_ll(-50.0), &penalized, 1).unwrap().statistic, 0.0);
    }

    proptest! {
        #[test]
        fn sf_monotone_in_x(a in 0.0f64..150.0, d in 0.0f64..50.0, df in 1u32..500) {
            let lo = chisq_sf(a, df);
            let hi = chisq_sf(a + d, df);
            prop_assert!(hi <= lo + 1e-14);
            prop_assert!((0.0..=1.0).contains(&lo));
        }
    }
}
