//! Scalar numerics shared by the model, sampler and oracle code.
//!
//! Everything here goes through `libm` so the crate stays `no_std` and the
//! results do not depend on the platform's libm.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `log(p / (1 - p))`.
pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "logit",
            value: p,
        });
    }
    Ok(libm::log(p) - libm::log1p(-p))
}

/// Inverse logit, branch-split so neither tail overflows or cancels.
#[inline]
pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow for large `x`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// `log C(n, k)` through log-gamma; exact enough for n in the thousands.
pub fn ln_choose(n: u32, k: u32) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    let (n, k) = (f64::from(n), f64::from(k));
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Binomial log-pmf with the success probability given on the logit scale:
/// `log C(n,z) + z*eta - n*log(1 + e^eta)`.
#[inline]
pub fn binomial_logpmf_logit(z: u32, n: u32, eta: f64) -> f64 {
    ln_choose(n, z) + f64::from(z) * eta - f64::from(n) * softplus(eta)
}

/// Normal log density with the variance (not the sd) as the scale argument.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + libm::log(var)) - 0.5 * d * d / var
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile (Wichura's AS 241, PPND16), relative accuracy
/// about 1e-16 over the open unit interval.
// Published coefficients, kept at their printed precision.
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "normal quantile",
            value: p,
        });
    }
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn ratio(num: &[f64; 8], den: &[f64; 8], r: f64) -> f64 {
        let horner = |c: &[f64; 8]| c.iter().rev().fold(0.0, |acc, &k| acc * r + k);
        horner(num) / horner(den)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return Ok(q * ratio(&A, &B, r));
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = libm::sqrt(-libm::log(tail));
    let value = if r <= 5.0 {
        r -= 1.6;
        ratio(&C, &D, r)
    } else {
        r -= 5.0;
        ratio(&E, &F, r)
    };
    Ok(if q < 0.0 { -value } else { value })
}

/// Regularized upper incomplete gamma function `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-15;
    const MAX_ITER: usize = 10_000;
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefactor = a * libm::log(x) - x - ln_gamma(a);
    if x < a + 1.0 {
        // Series for P(a, x).
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        1.0 - sum * libm::exp(log_prefactor)
    } else {
        // Modified Lentz continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        libm::exp(log_prefactor) * h
    }
}

/// Upper tail probability of a chi-squared variate with `df` degrees of freedom.
pub fn chi_squared_sf(x: f64, df: f64) -> f64 {
    gamma_q(0.5 * df, 0.5 * x)
}

/// Type-7 (linear interpolation between order statistics) quantile of
/// already-sorted data.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&level));
    let h = (sorted.len() - 1) as f64 * level;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sorts a copy and returns the requested type-7 quantiles.
pub fn quantiles(values: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    levels.iter().map(|&l| quantile_sorted(&sorted, l)).collect()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn logit_points() {
        assert_eq!(logit(0.5).unwrap(), 0.0);
        assert!((logit(0.75).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!(logit(0.0).is_err());
        assert!(logit(1.0).is_err());
        assert!(logit(f64::NAN).is_err());
        assert!((inv_logit(logit(0.0083).unwrap()) - 0.0083).abs() < 1e-12);
    }

    #[test]
    fn inv_logit_tails_do_not_underflow_to_garbage() {
        assert!(inv_logit(-745.0) >= 0.0);
        assert_eq!(inv_logit(800.0), 1.0);
        let p = inv_logit(-20.0);
        assert!((p - (-20f64).exp() / (1.0 + (-20f64).exp())).abs() < 1e-24);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &x in &[-30.0, -5.0, -0.3, 0.0, 0.7, 4.0, 30.0] {
            let naive = (1.0 + f64::exp(x)).ln();
            assert!((softplus(x) - naive).abs() < 1e-12, "{x}");
        }
        assert_eq!(softplus(1000.0), 1000.0);
    }

    #[test]
    fn ln_choose_against_products() {
        // C(50, 5) = 2118760
        assert!((ln_choose(50, 5) - 2_118_760f64.ln()).abs() < 1e-10);
        // C(400, 200) is around 1.03e119; finite through log-gamma.
        assert!(ln_choose(400, 200).is_finite());
        assert_eq!(ln_choose(7, 0), 0.0);
    }

    #[test]
    fn normal_quantile_constants() {
        assert!((normal_quantile(0.05).unwrap() + 1.644_853_626_951_472_2).abs() < 1e-12);
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!(normal_quantile(0.0).is_err());
    }

    #[test]
    fn normal_quantile_inverts_cdf_in_all_branches() {
        for &p in &[1e-300, 1e-20, 1e-9, 0.001, 0.02, 0.3, 0.5, 0.7, 0.97, 0.9999] {
            let x = normal_quantile(p).unwrap();
            let back = normal_cdf(x);
            assert!(((back - p) / p).abs() < 1e-9, "p={p} back={back}");
        }
    }

    #[test]
    fn chi_squared_table_values() {
        // Critical values from standard tables.
        assert!((chi_squared_sf(36.191, 19.0) - 0.01).abs() < 2e-5);
        assert!((chi_squared_sf(43.820, 19.0) - 0.001).abs() < 2e-6);
        assert!((chi_squared_sf(3.841_458_8, 1.0) - 0.05).abs() < 1e-8);
        assert_eq!(chi_squared_sf(0.0, 5.0), 1.0);
        // Series branch: df = 10, x = 2 -> 0.996340...
        assert!((chi_squared_sf(2.0, 10.0) - 0.996_340_153_172_22).abs() < 1e-10);
    }

    #[test]
    fn type7_quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        let q = quantiles(&v, &[0.0, 0.5, 1.0, 0.25]);
        assert_eq!(q, [1.0, 2.5, 4.0, 1.75]);
    }

    proptest! {
        #[test]
        fn logit_round_trip(p in 1e-8f64..(1.0 - 1e-8)) {
            let back = inv_logit(logit(p).unwrap());
            prop_assert!((back - p).abs() < 1e-12);
        }

        #[test]
        fn binomial_pmf_sums_to_one(n in 1u32..60, eta in -6.0f64..6.0) {
            let total: f64 = (0..=n).map(|z| binomial_logpmf_logit(z, n, eta).exp()).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }
}
