#![allow(clippy::needless_range_loop)]

use eventrisk_core::analysis::{
    adjusted_risk_ratio, approx_rr_decomposition, exceedance_pi, risk_ratio, sigma_summary,
    summarize_series, yearly_probabilities, Category, Criterion, Levels, Quantity,
};
use eventrisk_core::math::{inv_logit, quantiles};
use eventrisk_core::model::center;
use eventrisk_core::rng::chain_rng;
use eventrisk_core::{CovariateSeries, ParamState, Scenario, MONTHS};
use proptest::prelude::*;
use rand::Rng;

fn arb_state(t_len: usize) -> impl Strategy<Value = (ParamState, CovariateSeries)> {
    (
        proptest::collection::vec(-1.0f64..1.0, t_len),
        proptest::collection::vec(-1.0f64..1.0, t_len),
        proptest::collection::vec(-2.0f64..2.0, t_len),
        proptest::collection::vec(-2.0f64..2.0, t_len),
        proptest::array::uniform12(-1.5f64..1.5),
        proptest::array::uniform4(-3.0f64..1.0),
    )
        .prop_map(|(alpha, delta, xa, xn, gamma, b)| {
            let mut s = ParamState::zeros(alpha.len());
            s.alpha = alpha;
            s.delta = delta;
            s.gamma = gamma;
            center(&mut s.gamma);
            s.beta_all = [b[0], b[1]];
            s.beta_nat = [b[2], b[3]];
            (s, CovariateSeries::new(xa, xn).unwrap())
        })
}

/// Explicit twelve-term average of inverse logits.
fn oracle_probability(s: &ParamState, x: f64, k: Scenario, t: usize) -> f64 {
    let b = s.beta(k);
    let extra = if k == Scenario::All { s.delta[t] } else { 0.0 };
    let mut total = 0.0;
    for j in 0..MONTHS {
        let eta = b[0] + b[1] * x + s.alpha[t] + extra + s.gamma[j];
        total += 1.0 / (1.0 + (-eta).exp());
    }
    total / 12.0
}

proptest! {
    #[test]
    fn yearly_probabilities_match_explicit_sum((s, covs) in arb_state(5)) {
        for k in Scenario::BOTH {
            let p = yearly_probabilities(&s, &covs, k);
            for t in 0..5 {
                prop_assert!((p[t] - oracle_probability(&s, covs.x(k, t), k, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn risk_ratio_is_ratio_of_probabilities((s, covs) in arb_state(4)) {
        let rr = risk_ratio(&s, &covs);
        let pa = yearly_probabilities(&s, &covs, Scenario::All);
        let pn = yearly_probabilities(&s, &covs, Scenario::Nat);
        for t in 0..4 {
            prop_assert!((rr[t] - pa[t] / pn[t]).abs() <= 1e-12 * rr[t].max(1.0));
        }
    }

    #[test]
    fn adjusted_ratio_reproduces_unadjusted_at_own_covariate((s, covs) in arb_state(4), t in 0usize..4) {
        let rr = risk_ratio(&s, &covs);
        let adj = adjusted_risk_ratio(&s, covs.x(Scenario::All, t), covs.x(Scenario::Nat, t));
        prop_assert_eq!(adj[t], rr[t]);
        // Direct evaluation with fixed covariates.
        let (xa, xn) = (0.37, -0.81);
        let adj = adjusted_risk_ratio(&s, xa, xn);
        for u in 0..4 {
            let direct = oracle_probability(&s, xa, Scenario::All, u)
                / oracle_probability(&s, xn, Scenario::Nat, u);
            prop_assert!((adj[u] - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn decomposition_product_ignores_month_shift((s, covs) in arb_state(3), shift in proptest::array::uniform12(-1.0f64..1.0)) {
        let mut shifted = s.clone();
        let mut d = shift;
        center(&mut d);
        for j in 0..MONTHS {
            shifted.gamma[j] += d[j];
        }
        prop_assert_eq!(
            approx_rr_decomposition(&s, &covs).product,
            approx_rr_decomposition(&shifted, &covs).product
        );
    }
}

#[test]
fn no_year_effects_make_adjusted_series_constant() {
    let mut s = ParamState::zeros(6);
    s.beta_all = [-2.0, 0.7];
    s.beta_nat = [-2.5, 0.1];
    s.gamma[2] = 0.4;
    s.gamma[9] = -0.4;
    let adj = adjusted_risk_ratio(&s, 1.2, 0.3);
    assert!(adj.iter().all(|&v| v == adj[0]));
}

/// Random state whose monthly logits all sit below `ceiling`.
fn small_probability_state(rng: &mut impl Rng, covs: &CovariateSeries, ceiling: f64) -> ParamState {
    let t_len = covs.len();
    let mut s = ParamState::zeros(t_len);
    for t in 0..t_len {
        s.alpha[t] = rng.random_range(-1.0..1.0);
        s.delta[t] = rng.random_range(-1.0..1.0);
    }
    for g in s.gamma.iter_mut() {
        *g = rng.random_range(-1.0..1.0);
    }
    center(&mut s.gamma);
    s.beta_all = [rng.random_range(-3.0..0.0), rng.random_range(-1.0..1.0)];
    s.beta_nat = [rng.random_range(-3.0..0.0), rng.random_range(-1.0..1.0)];
    let (_, hi) = s.logit_range(covs);
    let drop = hi - ceiling + rng.random_range(0.0..3.0);
    s.beta_all[0] -= drop;
    s.beta_nat[0] -= drop;
    assert!(s.logit_range(covs).1 < ceiling);
    s
}

#[test]
fn small_probability_regime_and_month_shift() {
    let covs = CovariateSeries::new(vec![-1.2, -0.3, 0.4, 1.1], vec![-0.9, 0.1, 0.2, 0.6]).unwrap();
    let mut rng = chain_rng(5, 0);
    for (ceiling, tol) in [(-5.0, 0.01), (-7.0, 0.001)] {
        for _ in 0..1000 {
            let s = small_probability_state(&mut rng, &covs, ceiling);
            let exact = risk_ratio(&s, &covs);
            let approx = approx_rr_decomposition(&s, &covs).product;
            for t in 0..covs.len() {
                assert!((approx[t] / exact[t] - 1.0).abs() < tol);
            }
            if ceiling == -5.0 {
                // A sum-zero month shift moves the exact ratio only slightly.
                let mut shifted = s.clone();
                let mut d: [f64; MONTHS] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
                center(&mut d);
                let room = -5.0 - s.logit_range(&covs).1;
                let scale = (room / d.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0);
                for j in 0..MONTHS {
                    shifted.gamma[j] += scale * d[j];
                }
                let moved = risk_ratio(&shifted, &covs);
                for t in 0..covs.len() {
                    assert!((moved[t] / exact[t] - 1.0).abs() < 0.005);
                }
            }
        }
    }
}

fn draws_with_pattern(t_len: usize, n: usize, above: impl Fn(usize, usize) -> bool) -> Vec<ParamState> {
    (0..n)
        .map(|i| {
            let mut s = ParamState::zeros(t_len);
            for t in 0..t_len {
                // log RR = delta when all else is zero
                s.delta[t] = if above(i, t) { 1.0 } else { -1.0 };
            }
            s
        })
        .collect()
}

#[test]
fn exceedance_fraction_examples() {
    let all = draws_with_pattern(32, 50, |_, _| true);
    let pi = exceedance_pi(&all, 0.0, 0.0, Criterion::Greater(1.0), Levels::default()).unwrap();
    assert_eq!((pi.lower, pi.median, pi.upper), (1.0, 1.0, 1.0));
    assert_eq!(pi.category, Category::Stable);

    let half = draws_with_pattern(32, 50, |_, t| t % 2 == 0);
    let pi = exceedance_pi(&half, 0.0, 0.0, Criterion::Greater(1.0), Levels::default()).unwrap();
    assert_eq!(pi.median, 0.5);
    assert_eq!(pi.category, Category::Varies);

    let one = draws_with_pattern(32, 10, |_, t| t == 5);
    let pi = exceedance_pi(&one, 0.0, 0.0, Criterion::Greater(1.0), Levels::default()).unwrap();
    assert!((pi.median - 1.0 / 32.0).abs() < 1e-15);
    let pi = exceedance_pi(&one, 0.0, 0.0, Criterion::Less(1.0), Levels::default()).unwrap();
    assert!((pi.median - 31.0 / 32.0).abs() < 1e-15);

    assert!(exceedance_pi(&one, 0.0, 0.0, Criterion::Between(2.0, 0.5), Levels::default()).is_err());
    assert!(exceedance_pi(&[], 0.0, 0.0, Criterion::Greater(1.0), Levels::default()).is_err());
}

#[test]
fn sigma_quantiles_match_sorted_oracle() {
    let mut rng = chain_rng(8, 0);
    let draws: Vec<ParamState> = (0..999)
        .map(|_| {
            let mut s = ParamState::zeros(1);
            s.sigma2 = rng.random_range(0.1..4.0);
            s
        })
        .collect();
    let mut sigma: Vec<f64> = draws.iter().map(|s| s.sigma2.sqrt()).collect();
    sigma.sort_by(f64::total_cmp);
    // With 999 values the type-7 positions 0.025*998, 0.5*998, 0.975*998
    // are 24.95, 499, 973.05.
    let q = sigma_summary(&draws, Levels::default()).unwrap();
    assert_eq!(q.median, sigma[499]);
    assert!((q.lower - (0.05 * sigma[24] + 0.95 * sigma[25])).abs() < 1e-15);
    assert!((q.upper - (0.95 * sigma[973] + 0.05 * sigma[974])).abs() < 1e-15);
    assert!(q.lower <= q.median && q.median <= q.upper);
}

#[test]
fn series_summaries_are_ordered_and_in_range() {
    let covs = CovariateSeries::new(vec![-1.0, 0.0, 1.0], vec![-0.5, 0.0, 0.5]).unwrap();
    let mut rng = chain_rng(9, 0);
    let draws: Vec<ParamState> = (0..200)
        .map(|_| small_probability_state(&mut rng, &covs, 1.0))
        .collect();
    for q in Quantity::EVERY {
        let s = summarize_series(&draws, &covs, &[2000, 2001, 2002], q, (0.3, 0.1), Levels::default())
            .unwrap();
        assert_eq!(s.years.len(), 3);
        for t in 0..3 {
            assert!(s.lower[t] <= s.median[t] && s.median[t] <= s.upper[t]);
            assert!(s.lower[t] >= 0.0);
            if matches!(q, Quantity::ProbAll | Quantity::ProbNat) {
                assert!(s.upper[t] <= 1.0);
            }
        }
        let column: Vec<f64> = draws
            .iter()
            .map(|d| match q {
                Quantity::ProbAll => yearly_probabilities(d, &covs, Scenario::All)[1],
                Quantity::ProbNat => yearly_probabilities(d, &covs, Scenario::Nat)[1],
                Quantity::RiskRatio => risk_ratio(d, &covs)[1],
                Quantity::AdjustedRiskRatio => adjusted_risk_ratio(d, 0.3, 0.1)[1],
            })
            .collect();
        assert_eq!(quantiles(&column, &[0.5])[0], s.median[1]);
    }
    assert_eq!(inv_logit(0.0), 0.5);
}
