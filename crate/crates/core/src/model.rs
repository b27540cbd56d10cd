//! Domain types and the pure likelihood/prior kernels.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

pub const MONTHS: usize = 12;

/// Tolerance for the sum-zero constraint on the monthly effects.
pub const GAMMA_SUM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Scenario {
    /// Factual ensemble, all forcings.
    All,
    /// Counterfactual ensemble, natural forcings only.
    Nat,
}

impl Scenario {
    pub const BOTH: [Scenario; 2] = [Scenario::All, Scenario::Nat];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::All => "ALL",
            Scenario::Nat => "NAT",
        }
    }
}

/// Kind of extreme event a count panel records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EventType {
    Hot,
    Cold,
    Wet,
}

impl EventType {
    pub fn label(self) -> &'static str {
        match self {
            EventType::Hot => "hot",
            EventType::Cold => "cold",
            EventType::Wet => "wet",
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "hot" => Ok(EventType::Hot),
            "cold" => Ok(EventType::Cold),
            "wet" => Ok(EventType::Wet),
            other => Err(Error::InvalidArgument(format!("unknown event type `{other}`"))),
        }
    }

    /// Default (ALL, NAT) proposal correlations for the regression blocks.
    /// Hot events are nearly absent in NAT and cold events in ALL; the
    /// scenario with near-zero counts gets a strongly correlated proposal.
    pub fn default_beta_correlations(self) -> (f64, f64) {
        match self {
            EventType::Hot => (0.0, -0.95),
            EventType::Cold => (-0.95, 0.0),
            EventType::Wet => (0.0, 0.0),
        }
    }
}

/// Observed monthly event counts for both scenarios, one row per year.
#[derive(Clone, Debug, PartialEq)]
pub struct CountPanel {
    years: Vec<i32>,
    counts_all: Vec<[u32; MONTHS]>,
    counts_nat: Vec<[u32; MONTHS]>,
    ensemble_sizes: Vec<u32>,
}

impl CountPanel {
    pub fn new(
        years: Vec<i32>,
        counts_all: Vec<[u32; MONTHS]>,
        counts_nat: Vec<[u32; MONTHS]>,
        ensemble_sizes: Vec<u32>,
    ) -> Result<Self> {
        let t = years.len();
        if t == 0 {
            return Err(Error::InvalidPanel("panel has no years".into()));
        }
        if counts_all.len() != t || counts_nat.len() != t || ensemble_sizes.len() != t {
            return Err(Error::InvalidPanel(format!(
                "length mismatch: {} years, {} ALL rows, {} NAT rows, {} ensemble sizes",
                t,
                counts_all.len(),
                counts_nat.len(),
                ensemble_sizes.len()
            )));
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPanel("years must be strictly increasing".into()));
        }
        for (i, &n) in ensemble_sizes.iter().enumerate() {
            if n == 0 {
                return Err(Error::InvalidPanel(format!(
                    "year {}: ensemble size must be at least 1",
                    years[i]
                )));
            }
            for (k, rows) in [(Scenario::All, &counts_all), (Scenario::Nat, &counts_nat)] {
                if let Some(j) = rows[i].iter().position(|&z| z > n) {
                    return Err(Error::InvalidPanel(format!(
                        "year {} {} month {}: count {} exceeds ensemble size {}",
                        years[i],
                        k.label(),
                        j + 1,
                        rows[i][j],
                        n
                    )));
                }
            }
        }
        Ok(Self {
            years,
            counts_all,
            counts_nat,
            ensemble_sizes,
        })
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn ensemble_sizes(&self) -> &[u32] {
        &self.ensemble_sizes
    }

    pub fn ensemble_size(&self, t: usize) -> u32 {
        self.ensemble_sizes[t]
    }

    pub fn counts(&self, k: Scenario) -> &[[u32; MONTHS]] {
        match k {
            Scenario::All => &self.counts_all,
            Scenario::Nat => &self.counts_nat,
        }
    }

    pub fn count(&self, k: Scenario, t: usize, j: usize) -> u32 {
        self.counts(k)[t][j]
    }

    /// Pooled event frequency for one scenario over all cells.
    pub fn pooled_frequency(&self, k: Scenario) -> (u64, u64) {
        let events = self
            .counts(k)
            .iter()
            .flat_map(|row| row.iter())
            .map(|&z| u64::from(z))
            .sum();
        let trials = self
            .ensemble_sizes
            .iter()
            .map(|&n| u64::from(n) * MONTHS as u64)
            .sum();
        (events, trials)
    }
}

/// Yearly covariate (one per scenario) paired with a [`CountPanel`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovariateSeries {
    x_all: Vec<f64>,
    x_nat: Vec<f64>,
    standardized: bool,
}

impl CovariateSeries {
    /// Uses the values as given, without any rescaling.
    pub fn new(x_all: Vec<f64>, x_nat: Vec<f64>) -> Result<Self> {
        Self::check_shape(&x_all, &x_nat)?;
        Ok(Self {
            x_all,
            x_nat,
            standardized: false,
        })
    }

    /// Shifts and scales each scenario's raw series to mean zero and
    /// (n - 1)-variance one.
    pub fn standardize(raw_all: &[f64], raw_nat: &[f64]) -> Result<Self> {
        Self::check_shape(raw_all, raw_nat)?;
        if raw_all.len() < 2 {
            return Err(Error::InvalidCovariates(
                "standardization needs at least two years".into(),
            ));
        }
        let scale = |raw: &[f64], k: Scenario| -> Result<Vec<f64>> {
            let m = math::mean(raw);
            let sd = math::sqrt(math::sample_variance(raw));
            if !(sd > 0.0) || !sd.is_finite() {
                return Err(Error::InvalidCovariates(format!(
                    "{} series has zero or non-finite variance",
                    k.label()
                )));
            }
            Ok(raw.iter().map(|v| (v - m) / sd).collect())
        };
        Ok(Self {
            x_all: scale(raw_all, Scenario::All)?,
            x_nat: scale(raw_nat, Scenario::Nat)?,
            standardized: true,
        })
    }

    /// Accepts series that are already standardized, checking that they are.
    pub fn from_standardized(x_all: Vec<f64>, x_nat: Vec<f64>) -> Result<Self> {
        Self::check_shape(&x_all, &x_nat)?;
        for (k, x) in [(Scenario::All, &x_all), (Scenario::Nat, &x_nat)] {
            if x.len() < 2 {
                return Err(Error::InvalidCovariates(
                    "a standardized series needs at least two years".into(),
                ));
            }
            let m = math::mean(x);
            let v = math::sample_variance(x);
            if m.abs() >= 1e-6 || (v - 1.0).abs() >= 1e-6 {
                return Err(Error::InvalidCovariates(format!(
                    "{} series is not standardized (mean {m}, variance {v})",
                    k.label()
                )));
            }
        }
        Ok(Self {
            x_all,
            x_nat,
            standardized: true,
        })
    }

    fn check_shape(a: &[f64], n: &[f64]) -> Result<()> {
        if a.len() != n.len() {
            return Err(Error::InvalidCovariates(format!(
                "ALL has {} values, NAT has {}",
                a.len(),
                n.len()
            )));
        }
        if a.is_empty() {
            return Err(Error::InvalidCovariates("empty series".into()));
        }
        if a.iter().chain(n).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariates("non-finite value".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x_all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_all.is_empty()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn values(&self, k: Scenario) -> &[f64] {
        match k {
            Scenario::All => &self.x_all,
            Scenario::Nat => &self.x_nat,
        }
    }

    #[inline]
    pub fn x(&self, k: Scenario, t: usize) -> f64 {
        self.values(k)[t]
    }

    /// Mean covariate per scenario over the last `n` years (the stationary
    /// reference used for adjusted risk ratios).
    pub fn trailing_mean(&self, n: usize) -> Result<(f64, f64)> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidArgument(format!(
                "reference window of {n} years does not fit a {}-year series",
                self.len()
            )));
        }
        let tail = |x: &[f64]| math::mean(&x[x.len() - n..]);
        Ok((tail(&self.x_all), tail(&self.x_nat)))
    }
}

/// One complete parameter vector.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamState {
    /// Yearly effect shared by both scenarios.
    pub alpha: Vec<f64>,
    /// Yearly effect specific to the ALL scenario.
    pub delta: Vec<f64>,
    /// Monthly effects, constrained to sum to zero.
    pub gamma: [f64; MONTHS],
    /// (intercept, slope) for ALL.
    pub beta_all: [f64; 2],
    /// (intercept, slope) for NAT.
    pub beta_nat: [f64; 2],
    pub tau2: f64,
    pub sigma2: f64,
    pub omega2: f64,
}

impl ParamState {
    /// All effects zero, unit variances.
    pub fn zeros(n_years: usize) -> Self {
        Self {
            alpha: alloc::vec![0.0; n_years],
            delta: alloc::vec![0.0; n_years],
            gamma: [0.0; MONTHS],
            beta_all: [0.0; 2],
            beta_nat: [0.0; 2],
            tau2: 1.0,
            sigma2: 1.0,
            omega2: 1.0,
        }
    }

    pub fn n_years(&self) -> usize {
        self.alpha.len()
    }

    pub fn beta(&self, k: Scenario) -> [f64; 2] {
        match k {
            Scenario::All => self.beta_all,
            Scenario::Nat => self.beta_nat,
        }
    }

    /// Structural checks: matching lengths, sum-zero months, positive and
    /// finite variances.
    pub fn validate(&self) -> Result<()> {
        if self.alpha.len() != self.delta.len() {
            return Err(Error::InvalidState("alpha and delta lengths differ".into()));
        }
        let sum: f64 = self.gamma.iter().sum();
        if sum.abs() > GAMMA_SUM_TOL {
            return Err(Error::InvalidState(format!("gamma sums to {sum}, not zero")));
        }
        for (name, v) in [
            ("tau2", self.tau2),
            ("sigma2", self.sigma2),
            ("omega2", self.omega2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidState(format!("{name} = {v} is not positive")));
            }
        }
        let all_finite = self
            .alpha
            .iter()
            .chain(&self.delta)
            .chain(&self.gamma)
            .chain(&self.beta_all)
            .chain(&self.beta_nat)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidState("non-finite effect or coefficient".into()));
        }
        Ok(())
    }

    /// Scenario offset before the monthly effect:
    /// `b0 + b1 x + alpha + delta 1{ALL}`.
    #[inline]
    pub fn year_offset(&self, covs: &CovariateSeries, k: Scenario, t: usize) -> f64 {
        let b = self.beta(k);
        let base = b[0] + b[1] * covs.x(k, t) + self.alpha[t];
        match k {
            Scenario::All => base + self.delta[t],
            Scenario::Nat => base,
        }
    }

    /// Smallest and largest monthly logit implied by the state.
    pub fn logit_range(&self, covs: &CovariateSeries) -> (f64, f64) {
        let (gmin, gmax) = min_max(&self.gamma);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in 0..self.n_years() {
            for k in Scenario::BOTH {
                let o = self.year_offset(covs, k, t);
                lo = lo.min(o + gmin);
                hi = hi.max(o + gmax);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Truncation of every monthly logit probability to `(-L, L)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LogitBound {
    Inactive,
    Symmetric(f64),
}

impl LogitBound {
    #[inline]
    pub fn admits(self, lo: f64, hi: f64) -> bool {
        match self {
            LogitBound::Inactive => true,
            LogitBound::Symmetric(l) => lo > -l && hi < l,
        }
    }

    pub fn limit(self) -> Option<f64> {
        match self {
            LogitBound::Inactive => None,
            LogitBound::Symmetric(l) => Some(l),
        }
    }
}

/// Hyperparameters of the prior.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorConfig {
    /// Prior sd of every regression coefficient.
    pub beta_sd: f64,
    /// Lower end of the uniform prior on `tau2` and `sigma2` (0 by default).
    pub var_lower: f64,
    /// Upper end of the uniform prior on `tau2` and `sigma2`.
    pub var_upper: f64,
    /// Scale of the half-Cauchy prior on `omega2`.
    pub cauchy_scale: f64,
    pub logit_bound: LogitBound,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            beta_sd: 10.0,
            var_lower: 0.0,
            var_upper: 1000.0,
            cauchy_scale: 10.0,
            logit_bound: LogitBound::Symmetric(15.0),
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidPrior(format!("{name} must be positive, got {v}")))
            }
        };
        positive("beta_sd", self.beta_sd)?;
        positive("var_upper", self.var_upper)?;
        positive("cauchy_scale", self.cauchy_scale)?;
        if !(self.var_lower >= 0.0 && self.var_lower < self.var_upper) {
            return Err(Error::InvalidPrior(format!(
                "variance prior support ({}, {}) is empty",
                self.var_lower, self.var_upper
            )));
        }
        if let LogitBound::Symmetric(l) = self.logit_bound {
            positive("logit bound", l)?;
        }
        Ok(())
    }

    /// Log density of the uniform prior on `tau2` / `sigma2`.
    #[inline]
    pub fn log_variance_prior(&self, v: f64) -> f64 {
        if v > self.var_lower && v < self.var_upper {
            -math::ln(self.var_upper - self.var_lower)
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Log density of the half-Cauchy prior on `omega2`.
    #[inline]
    pub fn log_omega2_prior(&self, v: f64) -> f64 {
        if !(v > 0.0) || !v.is_finite() {
            return f64::NEG_INFINITY;
        }
        let s = self.cauchy_scale;
        let r = v / s;
        math::ln(2.0 / (core::f64::consts::PI * s)) - libm::log1p(r * r)
    }

    #[inline]
    pub fn log_beta_prior(&self, b: [f64; 2]) -> f64 {
        let v = self.beta_sd * self.beta_sd;
        math::normal_logpdf(b[0], 0.0, v) + math::normal_logpdf(b[1], 0.0, v)
    }
}

/// Log density of the monthly effects given `omega2`: an isotropic normal
/// restricted to the 11-dimensional sum-zero hyperplane. The vector is
/// centered first, so only its sum-zero projection matters.
pub fn log_gamma_prior(gamma: &[f64; MONTHS], omega2: f64) -> f64 {
    let m = gamma.iter().sum::<f64>() / MONTHS as f64;
    let ss: f64 = gamma.iter().map(|g| (g - m) * (g - m)).sum();
    let dim = (MONTHS - 1) as f64;
    -0.5 * dim * (math::LN_2PI + math::ln(omega2)) - 0.5 * ss / omega2
}

/// Logit of `p[k, t, j]`.
pub fn linear_predictor(
    state: &ParamState,
    covs: &CovariateSeries,
    k: Scenario,
    t: usize,
    j: usize,
) -> Result<f64> {
    let n = state.n_years();
    if t >= n || t >= covs.len() {
        return Err(Error::IndexOutOfRange {
            what: "year",
            index: t,
            len: n.min(covs.len()),
        });
    }
    if j >= MONTHS {
        return Err(Error::IndexOutOfRange {
            what: "month",
            index: j,
            len: MONTHS,
        });
    }
    Ok(state.year_offset(covs, k, t) + state.gamma[j])
}

fn check_consistent(state: &ParamState, panel: &CountPanel, covs: &CovariateSeries) -> Result<()> {
    let t = panel.n_years();
    if covs.len() != t || state.n_years() != t || state.delta.len() != t {
        return Err(Error::InvalidArgument(format!(
            "inconsistent year counts: panel {}, covariates {}, state {}",
            t,
            covs.len(),
            state.n_years()
        )));
    }
    Ok(())
}

/// Binomial log-likelihood of one cell.
pub fn cell_log_likelihood(
    state: &ParamState,
    panel: &CountPanel,
    covs: &CovariateSeries,
    k: Scenario,
    t: usize,
    j: usize,
) -> Result<f64> {
    let eta = linear_predictor(state, covs, k, t, j)?;
    Ok(math::binomial_logpmf_logit(
        panel.count(k, t, j),
        panel.ensemble_size(t),
        eta,
    ))
}

/// Full binomial log-likelihood (normalizing coefficients included).
pub fn log_likelihood(state: &ParamState, panel: &CountPanel, covs: &CovariateSeries) -> Result<f64> {
    check_consistent(state, panel, covs)?;
    let mut total = 0.0;
    for t in 0..panel.n_years() {
        let n = panel.ensemble_size(t);
        for k in Scenario::BOTH {
            let offset = state.year_offset(covs, k, t);
            let row = &panel.counts(k)[t];
            for j in 0..MONTHS {
                total += math::binomial_logpmf_logit(row[j], n, offset + state.gamma[j]);
            }
        }
    }
    Ok(total)
}

/// Log prior density; `-inf` outside the support or when the logit bound is
/// violated. The covariates are needed to evaluate the bound.
pub fn log_prior(state: &ParamState, prior: &PriorConfig, covs: &CovariateSeries) -> f64 {
    let mut lp = prior.log_variance_prior(state.tau2)
        + prior.log_variance_prior(state.sigma2)
        + prior.log_omega2_prior(state.omega2);
    if lp == f64::NEG_INFINITY {
        return lp;
    }
    if prior.logit_bound != LogitBound::Inactive {
        let (lo, hi) = state.logit_range(covs);
        if !prior.logit_bound.admits(lo, hi) {
            return f64::NEG_INFINITY;
        }
    }
    lp += state
        .alpha
        .iter()
        .map(|&a| math::normal_logpdf(a, 0.0, state.tau2))
        .sum::<f64>();
    lp += state
        .delta
        .iter()
        .map(|&d| math::normal_logpdf(d, 0.0, state.sigma2))
        .sum::<f64>();
    lp += log_gamma_prior(&state.gamma, state.omega2);
    lp += prior.log_beta_prior(state.beta_all) + prior.log_beta_prior(state.beta_nat);
    lp
}

/// Subtracts the mean so the vector sums to zero.
pub fn center(values: &mut [f64]) {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    for v in values.iter_mut() {
        *v -= m;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn one_year_panel(z_all: u32, z_nat: u32, n: u32) -> CountPanel {
        CountPanel::new(vec![2000], vec![[z_all; 12]], vec![[z_nat; 12]], vec![n]).unwrap()
    }

    #[test]
    fn panel_rejects_bad_cells() {
        let err = CountPanel::new(vec![2000], vec![[51; 12]], vec![[0; 12]], vec![50]);
        assert!(matches!(err, Err(Error::InvalidPanel(_))));
        let err = CountPanel::new(vec![2000], vec![[0; 12]], vec![[0; 12]], vec![0]);
        assert!(matches!(err, Err(Error::InvalidPanel(_))));
        let err = CountPanel::new(vec![], vec![], vec![], vec![]);
        assert!(matches!(err, Err(Error::InvalidPanel(_))));
        let err = CountPanel::new(
            vec![2001, 2000],
            vec![[0; 12]; 2],
            vec![[0; 12]; 2],
            vec![5, 5],
        );
        assert!(err.is_err());
    }

    #[test]
    fn standardization_invariant() {
        let raw_a = [14.1, 14.3, 14.2, 14.6, 14.9];
        let raw_n = [13.9, 14.0, 13.95, 14.05, 14.0];
        let c = CovariateSeries::standardize(&raw_a, &raw_n).unwrap();
        assert!(c.is_standardized());
        for k in Scenario::BOTH {
            let x = c.values(k);
            assert!(math::mean(x).abs() < 1e-9);
            assert!((math::sample_variance(x) - 1.0).abs() < 1e-6);
        }
        assert!(CovariateSeries::standardize(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(CovariateSeries::from_standardized(vec![1.0, 2.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn predictor_examples() {
        let covs = CovariateSeries::new(vec![2.0], vec![2.0]).unwrap();
        let mut s = ParamState::zeros(1);
        assert_eq!(linear_predictor(&s, &covs, Scenario::All, 0, 0).unwrap(), 0.0);
        s.beta_all = [1.0, 0.5];
        s.beta_nat = [1.0, 0.5];
        s.alpha[0] = 0.1;
        s.delta[0] = 0.2;
        s.gamma[3] = -0.3;
        let a = linear_predictor(&s, &covs, Scenario::All, 0, 3).unwrap();
        let n = linear_predictor(&s, &covs, Scenario::Nat, 0, 3).unwrap();
        assert!((a - 2.0).abs() < 1e-12);
        assert!((n - 1.8).abs() < 1e-12);
        assert!(linear_predictor(&s, &covs, Scenario::All, 1, 0).is_err());
        assert!(linear_predictor(&s, &covs, Scenario::All, 0, 12).is_err());
    }

    #[test]
    fn likelihood_single_cell_examples() {
        // n = 1, Z = 1, predictor 0: every cell contributes log(0.5).
        let covs = CovariateSeries::new(vec![0.0], vec![0.0]).unwrap();
        let s = ParamState::zeros(1);
        let panel = one_year_panel(1, 1, 1);
        let ll = log_likelihood(&s, &panel, &covs).unwrap();
        assert!((ll - 24.0 * 0.5f64.ln()).abs() < 1e-12);
        let cell = cell_log_likelihood(&s, &panel, &covs, Scenario::All, 0, 0).unwrap();
        assert!((cell - 0.5f64.ln()).abs() < 1e-15);

        // n = 50, Z = 5 at p = 0.1, against the direct pmf.
        let mut s = ParamState::zeros(1);
        s.beta_all[0] = logit_of(0.1);
        let panel = one_year_panel(5, 0, 50);
        let cell = cell_log_likelihood(&s, &panel, &covs, Scenario::All, 0, 7).unwrap();
        let oracle = 2_118_760f64.ln() + 5.0 * 0.1f64.ln() + 45.0 * 0.9f64.ln();
        assert!((cell - oracle).abs() < 1e-10);
    }

    fn logit_of(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    #[test]
    fn prior_support_and_bound() {
        let covs = CovariateSeries::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let prior = PriorConfig::default();
        let mut s = ParamState::zeros(2);
        assert!(log_prior(&s, &prior, &covs).is_finite());
        s.tau2 = 1001.0;
        assert_eq!(log_prior(&s, &prior, &covs), f64::NEG_INFINITY);

        let mut s = ParamState::zeros(2);
        let bounded = PriorConfig {
            logit_bound: LogitBound::Symmetric(10.0),
            ..prior
        };
        s.beta_all[0] = 10.1;
        assert_eq!(log_prior(&s, &bounded, &covs), f64::NEG_INFINITY);
        let open = PriorConfig {
            logit_bound: LogitBound::Inactive,
            ..prior
        };
        assert!(log_prior(&s, &open, &covs).is_finite());
    }

    #[test]
    fn prior_zero_state_term_by_term() {
        let t = 3;
        let covs = CovariateSeries::new(vec![0.0; t], vec![0.0; t]).unwrap();
        let prior = PriorConfig::default();
        let s = ParamState::zeros(t);
        // alpha, delta: 2T standard normal densities at 0
        let ln_phi0 = -0.5 * (2.0 * core::f64::consts::PI).ln();
        let effects = 2.0 * t as f64 * ln_phi0;
        // gamma: 11-dimensional standard normal at the origin
        let months = 11.0 * ln_phi0;
        // uniform(0, 1000) twice
        let uniforms = -2.0 * 1000f64.ln();
        // half-Cauchy(10) at 1: 2 / (pi * 10 * (1 + 0.01))
        let hc = (2.0 / (core::f64::consts::PI * 10.0 * 1.01)).ln();
        // four N(0, 100) densities at 0
        let betas = 4.0 * (-0.5 * (2.0 * core::f64::consts::PI * 100.0).ln());
        let oracle = effects + months + uniforms + hc + betas;
        assert!((log_prior(&s, &prior, &covs) - oracle).abs() < 1e-12);
    }

    #[test]
    fn state_validation() {
        let mut s = ParamState::zeros(2);
        assert!(s.validate().is_ok());
        s.gamma[0] = 1e-6;
        assert!(s.validate().is_err());
        let mut s = ParamState::zeros(2);
        s.omega2 = 0.0;
        assert!(s.validate().is_err());
    }

    fn arb_state(t: usize) -> impl Strategy<Value = ParamState> {
        (
            proptest::collection::vec(-2.0f64..2.0, t),
            proptest::collection::vec(-2.0f64..2.0, t),
            proptest::collection::vec(-2.0f64..2.0, MONTHS),
            proptest::array::uniform4(-3.0f64..3.0),
            proptest::array::uniform3(0.05f64..20.0),
        )
            .prop_map(|(alpha, delta, g, b, v)| {
                let mut gamma = [0.0; MONTHS];
                gamma.copy_from_slice(&g);
                center(&mut gamma);
                ParamState {
                    alpha,
                    delta,
                    gamma,
                    beta_all: [b[0], b[1]],
                    beta_nat: [b[2], b[3]],
                    tau2: v[0],
                    sigma2: v[1],
                    omega2: v[2],
                }
            })
    }

    fn fixture(t: usize) -> (CountPanel, CovariateSeries) {
        let years = (0..t as i32).map(|y| 1990 + y).collect();
        let n: Vec<u32> = (0..t).map(|i| 20 + 10 * i as u32).collect();
        let all = (0..t)
            .map(|i| core::array::from_fn(|j| ((i * 7 + j * 3) % 11) as u32))
            .collect();
        let nat = (0..t)
            .map(|i| core::array::from_fn(|j| ((i * 5 + j) % 6) as u32))
            .collect();
        let panel = CountPanel::new(years, all, nat, n).unwrap();
        let xa: Vec<f64> = (0..t).map(|i| i as f64 * 0.3 - 0.5).collect();
        let xn: Vec<f64> = (0..t).map(|i| (i as f64 * 0.7).sin()).collect();
        (panel, CovariateSeries::new(xa, xn).unwrap())
    }

    proptest! {
        #[test]
        fn likelihood_decomposes_over_cells(s in arb_state(4), split in 0usize..96) {
            let (panel, covs) = fixture(4);
            let total = log_likelihood(&s, &panel, &covs).unwrap();
            let mut first = 0.0;
            let mut second = 0.0;
            let mut idx = 0;
            for k in Scenario::BOTH {
                for t in 0..4 {
                    for j in 0..MONTHS {
                        let c = cell_log_likelihood(&s, &panel, &covs, k, t, j).unwrap();
                        if (idx * 37) % 96 < split { first += c } else { second += c }
                        idx += 1;
                    }
                }
            }
            prop_assert!((total - (first + second)).abs() < 1e-9);
            prop_assert!(total.is_finite());
        }

        #[test]
        fn prior_exchangeable_in_years(s in arb_state(5), rot in 1usize..5) {
            let covs = CovariateSeries::new(vec![0.0; 5], vec![0.0; 5]).unwrap();
            let prior = PriorConfig { logit_bound: LogitBound::Inactive, ..PriorConfig::default() };
            let base = log_prior(&s, &prior, &covs);
            let mut p = s.clone();
            p.alpha.rotate_left(rot);
            prop_assert!((log_prior(&p, &prior, &covs) - base).abs() < 1e-9);
            let mut p = s.clone();
            p.delta.reverse();
            prop_assert!((log_prior(&p, &prior, &covs) - base).abs() < 1e-9);
        }

        #[test]
        fn prior_invariant_to_recentred_gamma_shift(s in arb_state(3), c in -5.0f64..5.0) {
            let covs = CovariateSeries::new(vec![0.0; 3], vec![0.0; 3]).unwrap();
            let prior = PriorConfig { logit_bound: LogitBound::Inactive, ..PriorConfig::default() };
            let base = log_prior(&s, &prior, &covs);
            let mut shifted = s.clone();
            for g in shifted.gamma.iter_mut() { *g += c; }
            center(&mut shifted.gamma);
            prop_assert!(shifted.validate().is_ok());
            prop_assert!((log_prior(&shifted, &prior, &covs) - base).abs() < 1e-9);
        }

        #[test]
        fn cell_likelihood_unimodal_at_empirical_logit(
            n in 2u32..400, frac in 0.01f64..0.99, d1 in 0.0f64..5.0, extra in 1e-3f64..5.0
        ) {
            let z = ((frac * n as f64).round() as u32).clamp(1, n - 1);
            let mode = logit_of(z as f64 / n as f64);
            for sign in [-1.0, 1.0] {
                let near = math::binomial_logpmf_logit(z, n, mode + sign * d1);
                let far = math::binomial_logpmf_logit(z, n, mode + sign * (d1 + extra));
                prop_assert!(near > far);
            }
        }
    }
}
