use eventrisk_core::math::normal_quantile;
use eventrisk_core::rng::chain_rng;
use eventrisk_core::single_year::{phi_ci, StudyInput};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn input(xi_hat: f64, sampling_var: f64, sigma2: f64, p: f64) -> StudyInput {
    StudyInput {
        xi_hat,
        sampling_var,
        sigma2,
        percentile: p,
        confidence: 0.95,
    }
}

#[test]
fn reference_constants() {
    assert!((normal_quantile(0.05).unwrap() + 1.6449).abs() < 1e-4);
    assert!((normal_quantile(0.975).unwrap() - 1.96).abs() < 1e-4);
}

#[test]
fn coverage_under_two_level_normal_model() {
    let mut rng = chain_rng(31, 0);
    let (sampling_var, sigma2, p) = (0.3f64, 0.5f64, 0.05);
    let s = (sampling_var + sigma2).sqrt();
    let c = normal_quantile(p).unwrap();
    let n = 100_000;
    let mut covered = 0;
    for _ in 0..n {
        let mu: f64 = rng.random_range(-2.0..2.0);
        let xi_t = mu + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let xi_hat = xi_t + sampling_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let phi = mu + c * s;
        let ci = phi_ci(&input(xi_hat, sampling_var, sigma2, p)).unwrap();
        covered += (ci.lower <= phi && phi <= ci.upper) as usize;
    }
    let rate = covered as f64 / n as f64;
    assert!((rate - 0.95).abs() < 0.005, "coverage {rate}");
}

proptest! {
    #[test]
    fn width_is_independent_of_percentile(
        xi in -5.0f64..5.0, v in 0.01f64..3.0, s2 in 0.0f64..3.0, p in 0.01f64..0.99,
    ) {
        let ci = phi_ci(&input(xi, v, s2, p)).unwrap();
        let z = normal_quantile(0.975).unwrap();
        prop_assert!(((ci.upper - ci.lower) - 2.0 * z * (v + s2).sqrt()).abs() < 1e-12);
        let (lo, hi) = ci.ratio_bounds();
        prop_assert!((lo - ci.lower.exp()).abs() < 1e-12 * lo.max(1.0));
        prop_assert!(hi >= lo);
    }

    #[test]
    fn bounds_increase_with_percentile(
        xi in -5.0f64..5.0, v in 0.01f64..3.0, s2 in 0.0f64..3.0,
        p in 0.01f64..0.98, dp in 0.001f64..0.01,
    ) {
        let a = phi_ci(&input(xi, v, s2, p)).unwrap();
        let b = phi_ci(&input(xi, v, s2, p + dp)).unwrap();
        prop_assert!(b.lower > a.lower && b.upper > a.upper);
    }
}
