//! Yearly probabilities, risk ratios and the exceedance-fraction diagnostic.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{CovariateSeries, ParamState, Scenario, MONTHS};

/// Credible-interval levels.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Levels {
    pub lower: f64,
    pub upper: f64,
}

impl Default for Levels {
    fn default() -> Self {
        Self {
            lower: 0.025,
            upper: 0.975,
        }
    }
}

impl Levels {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lower && self.lower <= 0.5 && 0.5 <= self.upper && self.upper <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "quantile levels ({}, {}) must satisfy 0 <= lower <= 0.5 <= upper <= 1",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Posterior median and interval of a scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl Summary {
    pub fn of(values: &[f64], levels: Levels) -> Result<Self> {
        levels.validate()?;
        if values.is_empty() {
            return Err(Error::InvalidArgument("cannot summarize zero draws".into()));
        }
        let q = math::quantiles(values, &[levels.lower, 0.5, levels.upper]);
        Ok(Self {
            lower: q[0],
            median: q[1],
            upper: q[2],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Quantity {
    ProbAll,
    ProbNat,
    RiskRatio,
    AdjustedRiskRatio,
}

impl Quantity {
    pub const EVERY: [Quantity; 4] = [
        Quantity::ProbAll,
        Quantity::ProbNat,
        Quantity::RiskRatio,
        Quantity::AdjustedRiskRatio,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Quantity::ProbAll => "prob_all",
            Quantity::ProbNat => "prob_nat",
            Quantity::RiskRatio => "risk_ratio",
            Quantity::AdjustedRiskRatio => "adjusted_risk_ratio",
        }
    }
}

/// Per-year posterior summaries of one quantity.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RiskSeries {
    pub quantity: Quantity,
    pub years: Vec<i32>,
    pub median: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[inline]
fn mean_over_months(offset: f64, gamma: &[f64; MONTHS]) -> f64 {
    gamma
        .iter()
        .map(|g| math::inv_logit(offset + g))
        .sum::<f64>()
        / MONTHS as f64
}

fn offset_at(draw: &ParamState, k: Scenario, t: usize, x: f64) -> f64 {
    let b = draw.beta(k);
    let base = b[0] + b[1] * x + draw.alpha[t];
    match k {
        Scenario::All => base + draw.delta[t],
        Scenario::Nat => base,
    }
}

/// Yearly event probability: the average of the twelve monthly
/// probabilities.
pub fn yearly_probabilities(draw: &ParamState, covs: &CovariateSeries, k: Scenario) -> Vec<f64> {
    (0..draw.n_years())
        .map(|t| mean_over_months(offset_at(draw, k, t, covs.x(k, t)), &draw.gamma))
        .collect()
}

/// `p_A[t] / p_N[t]` per year.
pub fn risk_ratio(draw: &ParamState, covs: &CovariateSeries) -> Vec<f64> {
    let pa = yearly_probabilities(draw, covs, Scenario::All);
    let pn = yearly_probabilities(draw, covs, Scenario::Nat);
    pa.iter().zip(&pn).map(|(a, n)| a / n).collect()
}

/// Risk ratio with each scenario's covariate fixed at a reference value for
/// every year; year and month effects are kept.
pub fn adjusted_risk_ratio(draw: &ParamState, x_star_all: f64, x_star_nat: f64) -> Vec<f64> {
    (0..draw.n_years())
        .map(|t| {
            let pa = mean_over_months(offset_at(draw, Scenario::All, t, x_star_all), &draw.gamma);
            let pn = mean_over_months(offset_at(draw, Scenario::Nat, t, x_star_nat), &draw.gamma);
            pa / pn
        })
        .collect()
}

/// Small-probability factorization of the yearly risk ratio,
/// `RR[t] ~ rr0 * covariate_scale[t] * year_factor[t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RrDecomposition {
    /// `exp(b_A0 - b_N0)`
    pub rr0: f64,
    /// `exp(b_A1 x_A[t] - b_N1 x_N[t])`
    pub covariate_scale: Vec<f64>,
    /// `exp(delta[t])`
    pub year_factor: Vec<f64>,
    pub product: Vec<f64>,
}

pub fn approx_rr_decomposition(draw: &ParamState, covs: &CovariateSeries) -> RrDecomposition {
    let (ba, bn) = (draw.beta_all, draw.beta_nat);
    let rr0 = math::exp(ba[0] - bn[0]);
    let covariate_scale: Vec<f64> = (0..draw.n_years())
        .map(|t| math::exp(ba[1] * covs.x(Scenario::All, t) - bn[1] * covs.x(Scenario::Nat, t)))
        .collect();
    let year_factor: Vec<f64> = draw.delta.iter().map(|&d| math::exp(d)).collect();
    let product = covariate_scale
        .iter()
        .zip(&year_factor)
        .map(|(c, f)| rr0 * c * f)
        .collect();
    RrDecomposition {
        rr0,
        covariate_scale,
        year_factor,
        product,
    }
}

/// Threshold criterion on a yearly risk ratio. Comparisons are strict.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Criterion {
    Greater(f64),
    Less(f64),
    /// `lo < RR < hi`
    Between(f64, f64),
}

impl Criterion {
    pub fn validate(&self) -> Result<()> {
        let positive = |c: f64| {
            if c > 0.0 && c.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("cutoff {c} must be positive")))
            }
        };
        match *self {
            Criterion::Greater(c) | Criterion::Less(c) => positive(c),
            Criterion::Between(lo, hi) => {
                positive(lo)?;
                positive(hi)?;
                if lo < hi {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "between-cutoffs out of order: {lo} >= {hi}"
                    )))
                }
            }
        }
    }

    #[inline]
    pub fn holds(&self, rr: f64) -> bool {
        match *self {
            Criterion::Greater(c) => rr > c,
            Criterion::Less(c) => rr < c,
            Criterion::Between(lo, hi) => lo < rr && rr < hi,
        }
    }

    pub fn direction(&self) -> &'static str {
        match self {
            Criterion::Greater(_) => "greater",
            Criterion::Less(_) => "less",
            Criterion::Between(..) => "between",
        }
    }

    pub fn cutoffs(&self) -> Vec<f64> {
        match *self {
            Criterion::Greater(c) | Criterion::Less(c) => alloc::vec![c],
            Criterion::Between(lo, hi) => alloc::vec![lo, hi],
        }
    }
}

/// Whether the qualitative conclusion of a one-year study varies by year.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Category {
    /// Interval inside `[0.05, 0.95]`: conclusions vary over time.
    Varies = 1,
    /// Interval straddles a boundary.
    Inconclusive = 2,
    /// Interval inside `[0, 0.05)` or `(0.95, 1]`: conclusions are stable.
    Stable = 3,
}

impl Category {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Three-way classification of an interval estimate of the exceedance
/// fraction.
pub fn classify(lower: f64, upper: f64) -> Result<Category> {
    if !(0.0 <= lower && lower <= upper && upper <= 1.0) {
        return Err(Error::InvalidInterval(format!(
            "({lower}, {upper}) is not an ordered sub-interval of [0, 1]"
        )));
    }
    Ok(if upper < 0.05 || lower > 0.95 {
        Category::Stable
    } else if lower >= 0.05 && upper <= 0.95 {
        Category::Varies
    } else {
        Category::Inconclusive
    })
}

/// Posterior summary of the fraction of years meeting a criterion.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PiEstimate {
    pub criterion: Criterion,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
    pub category: Category,
}

/// Fraction of entries of `series` satisfying `criterion`.
pub fn exceedance_fraction(series: &[f64], criterion: &Criterion) -> f64 {
    let hits = series.iter().filter(|&&rr| criterion.holds(rr)).count();
    hits as f64 / series.len() as f64
}

/// Per draw, the fraction of years whose adjusted risk ratio meets the
/// criterion; summarized across draws and classified.
pub fn exceedance_pi(
    draws: &[ParamState],
    x_star_all: f64,
    x_star_nat: f64,
    criterion: Criterion,
    levels: Levels,
) -> Result<PiEstimate> {
    criterion.validate()?;
    let fractions: Vec<f64> = draws
        .iter()
        .map(|d| exceedance_fraction(&adjusted_risk_ratio(d, x_star_all, x_star_nat), &criterion))
        .collect();
    let s = Summary::of(&fractions, levels)?;
    Ok(PiEstimate {
        criterion,
        lower: s.lower,
        median: s.median,
        upper: s.upper,
        category: classify(s.lower, s.upper)?,
    })
}

/// Quantiles of `sigma = sqrt(sigma2)`.
pub fn sigma_summary(draws: &[ParamState], levels: Levels) -> Result<Summary> {
    let sigma: Vec<f64> = draws.iter().map(|d| math::sqrt(d.sigma2)).collect();
    Summary::of(&sigma, levels)
}

/// Per-year quantiles of one quantity across draws. `x_star` is used only
/// for the adjusted risk ratio.
pub fn summarize_series(
    draws: &[ParamState],
    covs: &CovariateSeries,
    years: &[i32],
    quantity: Quantity,
    x_star: (f64, f64),
    levels: Levels,
) -> Result<RiskSeries> {
    levels.validate()?;
    if draws.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize zero draws".into()));
    }
    let t_len = years.len();
    if covs.len() != t_len || draws.iter().any(|d| d.n_years() != t_len) {
        return Err(Error::InvalidArgument(format!(
            "{t_len} years but covariates or draws disagree"
        )));
    }
    let per_draw: Vec<Vec<f64>> = draws
        .iter()
        .map(|d| match quantity {
            Quantity::ProbAll => yearly_probabilities(d, covs, Scenario::All),
            Quantity::ProbNat => yearly_probabilities(d, covs, Scenario::Nat),
            Quantity::RiskRatio => risk_ratio(d, covs),
            Quantity::AdjustedRiskRatio => adjusted_risk_ratio(d, x_star.0, x_star.1),
        })
        .collect();
    let mut series = RiskSeries {
        quantity,
        years: years.to_vec(),
        median: Vec::with_capacity(t_len),
        lower: Vec::with_capacity(t_len),
        upper: Vec::with_capacity(t_len),
    };
    let mut column = Vec::with_capacity(draws.len());
    for t in 0..t_len {
        column.clear();
        column.extend(per_draw.iter().map(|v| v[t]));
        let s = Summary::of(&column, levels)?;
        series.lower.push(s.lower);
        series.median.push(s.median);
        series.upper.push(s.upper);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn covs(x_all: &[f64], x_nat: &[f64]) -> CovariateSeries {
        CovariateSeries::new(x_all.to_vec(), x_nat.to_vec()).unwrap()
    }

    #[test]
    fn zero_predictors_give_one_half() {
        let s = ParamState::zeros(3);
        let c = covs(&[0.1, 0.2, 0.3], &[0.0, 0.0, 0.0]);
        for p in yearly_probabilities(&s, &c, Scenario::All) {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn constant_logit_gives_that_probability() {
        let mut s = ParamState::zeros(2);
        s.beta_nat[0] = math::logit(0.1).unwrap();
        let c = covs(&[1.0, -1.0], &[1.0, -1.0]);
        for p in yearly_probabilities(&s, &c, Scenario::Nat) {
            assert!((p - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_scenarios_have_unit_ratio() {
        let mut s = ParamState::zeros(4);
        s.beta_all = [-3.0, 0.4];
        s.beta_nat = [-3.0, 0.4];
        s.alpha = alloc::vec![0.3, -0.2, 0.1, 0.5];
        s.gamma[0] = 0.6;
        s.gamma[5] = -0.6;
        let x = [-1.0, 0.0, 0.5, 1.5];
        for rr in risk_ratio(&s, &covs(&x, &x)) {
            assert_eq!(rr, 1.0);
        }
    }

    #[test]
    fn decomposition_examples() {
        let s = ParamState::zeros(2);
        let c = covs(&[1.0, 2.0], &[0.5, 0.5]);
        let d = approx_rr_decomposition(&s, &c);
        assert_eq!(d.rr0, 1.0);
        assert_eq!(d.product, [1.0, 1.0]);
        let mut s = s;
        s.beta_all[0] = 1.0;
        s.beta_nat[0] = 0.5;
        assert!((approx_rr_decomposition(&s, &c).rr0 - 0.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn classification_rule() {
        assert_eq!(classify(0.96, 0.99).unwrap(), Category::Stable);
        assert_eq!(classify(0.20, 0.80).unwrap(), Category::Varies);
        assert_eq!(classify(0.90, 0.97).unwrap(), Category::Inconclusive);
        assert_eq!(classify(0.0, 0.04).unwrap(), Category::Stable);
        assert_eq!(classify(0.05, 0.95).unwrap(), Category::Varies);
        assert_eq!(classify(0.0, 0.05).unwrap(), Category::Inconclusive);
        assert_eq!(classify(0.95, 1.0).unwrap(), Category::Inconclusive);
        assert_eq!(classify(1.0, 1.0).unwrap(), Category::Stable);
        assert!(classify(0.6, 0.4).is_err());
        assert!(classify(-0.1, 0.4).is_err());
        assert!(classify(0.1, f64::NAN).is_err());
    }

    #[test]
    fn criterion_checks() {
        assert!(Criterion::Between(2.0, 1.0).validate().is_err());
        assert!(Criterion::Greater(0.0).validate().is_err());
        assert!(!Criterion::Greater(1.0).holds(1.0));
        assert!(!Criterion::Less(1.0).holds(1.0));
        assert!(Criterion::Between(0.5, 2.0).holds(1.0));
        let one_of_32: Vec<f64> = (0..32).map(|t| if t == 0 { 3.0 } else { 0.5 }).collect();
        assert_eq!(exceedance_fraction(&one_of_32, &Criterion::Greater(1.0)), 1.0 / 32.0);
    }

    #[test]
    fn sigma_quantiles() {
        let mut s = ParamState::zeros(1);
        s.sigma2 = 4.0;
        let draws = alloc::vec![s; 10];
        let q = sigma_summary(&draws, Levels::default()).unwrap();
        assert_eq!((q.lower, q.median, q.upper), (2.0, 2.0, 2.0));
    }
}
