//! Reference computations for testing the sampler: forward simulation,
//! brute-force grid posteriors for a reduced model, and simulation-based
//! calibration.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{
    center, log_likelihood, log_prior, CountPanel, CovariateSeries, LogitBound, ParamState,
    PriorConfig, Scenario, MONTHS,
};
use crate::rng::{chain_rng, split_seed};
use crate::sampler::{run_sampler, SamplerConfig};

/// Ensemble size of the reference simulations in a given year.
pub fn table1_ensemble_size(year: i32) -> u32 {
    match year {
        ..=1996 => 50,
        1997..=2010 => 100,
        _ => 400,
    }
}

/// Ensemble sizes for `n_years` years following the shape of the reference
/// schedule (1982-2013 stretched over `n_years`, each year taking the size
/// at the middle of its stretch), divided by `divisor` and floored at 1.
pub fn scaled_schedule(n_years: usize, divisor: u32) -> Vec<u32> {
    let divisor = divisor.max(1);
    (0..n_years)
        .map(|t| {
            let year = 1982 + ((2 * t + 1) * 32 / (2 * n_years.max(1))) as i32;
            (table1_ensemble_size(year) / divisor).max(1)
        })
        .collect()
}

/// Everything needed to simulate a count panel.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub years: Vec<i32>,
    pub ensemble_sizes: Vec<u32>,
    pub true_state: ParamState,
    pub covariates: CovariateSeries,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let t = self.years.len();
        if t == 0 {
            return Err(Error::InvalidArgument("generator needs at least one year".into()));
        }
        if self.ensemble_sizes.len() != t
            || self.covariates.len() != t
            || self.true_state.n_years() != t
        {
            return Err(Error::InvalidArgument(format!(
                "{t} years but {} ensemble sizes, {} covariate values, {} year effects",
                self.ensemble_sizes.len(),
                self.covariates.len(),
                self.true_state.n_years()
            )));
        }
        self.true_state.validate()
    }
}

/// Draws every cell independently from its binomial distribution.
pub fn generate_panel(spec: &GeneratorSpec) -> Result<CountPanel> {
    spec.validate()?;
    let mut rng = chain_rng(spec.seed, 0);
    let s = &spec.true_state;
    let t_len = spec.years.len();
    let mut counts_all = Vec::with_capacity(t_len);
    let mut counts_nat = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let n = spec.ensemble_sizes[t];
        for k in Scenario::BOTH {
            let offset = s.year_offset(&spec.covariates, k, t);
            let mut row = [0u32; MONTHS];
            for (j, cell) in row.iter_mut().enumerate() {
                let p = math::inv_logit(offset + s.gamma[j]);
                let dist = Binomial::new(n as u64, p)
                    .map_err(|e| Error::InvalidArgument(format!("binomial({n}, {p}): {e}")))?;
                *cell = dist.sample(&mut rng) as u32;
            }
            match k {
                Scenario::All => counts_all.push(row),
                Scenario::Nat => counts_nat.push(row),
            }
        }
    }
    CountPanel::new(
        spec.years.clone(),
        counts_all,
        counts_nat,
        spec.ensemble_sizes.clone(),
    )
}

/// Draws a state from `prior`, rejecting draws that violate the logit
/// bound. Variances are uniform on `(var_lower, var_upper)` and `omega2` is
/// half-Cauchy. Gives up after `max_tries` rejections.
pub fn draw_from_prior<R: Rng + ?Sized>(
    rng: &mut R,
    prior: &PriorConfig,
    covs: &CovariateSeries,
    max_tries: usize,
) -> Result<ParamState> {
    prior.validate()?;
    let t_len = covs.len();
    let span = prior.var_upper - prior.var_lower;
    for _ in 0..max_tries {
        let mut s = ParamState::zeros(t_len);
        s.tau2 = prior.var_lower + span * rng.random::<f64>();
        s.sigma2 = prior.var_lower + span * rng.random::<f64>();
        // Half-Cauchy by inversion.
        let u: f64 = rng.random();
        s.omega2 = prior.cauchy_scale * libm::tan(0.5 * core::f64::consts::PI * u);
        if !(s.tau2 > prior.var_lower && s.sigma2 > prior.var_lower && s.omega2 > 0.0) {
            continue;
        }
        let mut normal = |sd: f64| -> f64 { sd * rng.sample::<f64, _>(StandardNormal) };
        let (tau, sigma, omega) = (math::sqrt(s.tau2), math::sqrt(s.sigma2), math::sqrt(s.omega2));
        for t in 0..t_len {
            s.alpha[t] = normal(tau);
            s.delta[t] = normal(sigma);
        }
        for g in s.gamma.iter_mut() {
            *g = normal(omega);
        }
        center(&mut s.gamma);
        for b in s.beta_all.iter_mut().chain(s.beta_nat.iter_mut()) {
            *b = normal(prior.beta_sd);
        }
        let (lo, hi) = s.logit_range(covs);
        if prior.logit_bound.admits(lo, hi) {
            return Ok(s);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no prior draw inside the logit bound after {max_tries} tries"
    )))
}

/// Normalized posterior density of the two intercepts on a square grid,
/// every other parameter fixed. Points sit at cell centres so that the
/// midpoint rule stays accurate when the density is cut off by the logit
/// bound at the grid edge.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPosterior {
    /// Cell centres, shared by both axes.
    pub axis: Vec<f64>,
    /// Density at `(axis[i], axis[j])` for ALL intercept `i`, NAT intercept
    /// `j`, stored at `i * n + j`.
    pub density: Vec<f64>,
}

impl GridPosterior {
    fn n(&self) -> usize {
        self.axis.len()
    }

    fn step(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.density[i * self.n() + j]
    }

    /// Marginal density of one intercept (0 = ALL, 1 = NAT) on the grid.
    pub fn marginal(&self, which: usize) -> Vec<f64> {
        let n = self.n();
        let h = self.step();
        (0..n)
            .map(|a| {
                let line: f64 = (0..n)
                    .map(|b| if which == 0 { self.at(a, b) } else { self.at(b, a) })
                    .sum();
                h * line
            })
            .collect()
    }

    pub fn integral(&self) -> f64 {
        self.step() * self.marginal(0).iter().sum::<f64>()
    }

    pub fn marginal_mean(&self, which: usize) -> f64 {
        let m = self.marginal(which);
        let num: f64 = m.iter().zip(&self.axis).map(|(d, x)| d * x).sum();
        num / m.iter().sum::<f64>()
    }

    /// Marginal CDF at the `n + 1` cell edges.
    pub fn marginal_cdf(&self, which: usize) -> Vec<f64> {
        let m = self.marginal(which);
        let mut cdf = vec![0.0; m.len() + 1];
        for i in 0..m.len() {
            cdf[i + 1] = cdf[i] + m[i];
        }
        let total = cdf[m.len()];
        for c in cdf.iter_mut() {
            *c /= total;
        }
        cdf
    }

    /// Marginal CDF evaluated anywhere, linear within each cell.
    pub fn cdf_fn(&self, which: usize) -> impl Fn(f64) -> f64 + '_ {
        let cdf = self.marginal_cdf(which);
        move |x: f64| {
            let h = self.step();
            let lo = self.axis[0] - 0.5 * h;
            if x <= lo {
                return 0.0;
            }
            let pos = (x - lo) / h;
            let i = pos as usize;
            if i + 1 >= cdf.len() {
                return 1.0;
            }
            let w = pos - i as f64;
            cdf[i] * (1.0 - w) + cdf[i + 1] * w
        }
    }
}

/// Evaluates the posterior of `(b_A0, b_N0)` with every other component
/// fixed at `base`, on `resolution` cells per axis covering `[lo, hi]`.
pub fn grid_posterior_2d(
    panel: &CountPanel,
    covs: &CovariateSeries,
    prior: &PriorConfig,
    base: &ParamState,
    bounds: (f64, f64),
    resolution: usize,
) -> Result<GridPosterior> {
    let (lo, hi) = bounds;
    if !(lo < hi) || resolution < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs lo < hi and at least two points, got ({lo}, {hi}) x {resolution}"
        )));
    }
    let h = (hi - lo) / resolution as f64;
    let axis: Vec<f64> = (0..resolution).map(|i| lo + h * (i as f64 + 0.5)).collect();
    let mut logd = vec![f64::NEG_INFINITY; resolution * resolution];
    let mut state = base.clone();
    for (i, &a) in axis.iter().enumerate() {
        for (j, &b) in axis.iter().enumerate() {
            state.beta_all[0] = a;
            state.beta_nat[0] = b;
            let lp = log_prior(&state, prior, covs);
            if lp == f64::NEG_INFINITY {
                continue;
            }
            logd[i * resolution + j] = log_likelihood(&state, panel, covs)? + lp;
        }
    }
    let max = logd.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::EmptyGrid);
    }
    let mut grid = GridPosterior {
        axis,
        density: logd.iter().map(|&l| math::exp(l - max)).collect(),
    };
    let z = grid.integral();
    for d in grid.density.iter_mut() {
        *d /= z;
    }
    Ok(grid)
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Parameters whose calibration is checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbcParameter {
    BetaAllSlope,
    Tau2,
    Sigma2,
}

impl SbcParameter {
    pub const EVERY: [SbcParameter; 3] =
        [SbcParameter::BetaAllSlope, SbcParameter::Tau2, SbcParameter::Sigma2];

    pub fn value(self, s: &ParamState) -> f64 {
        match self {
            SbcParameter::BetaAllSlope => s.beta_all[1],
            SbcParameter::Tau2 => s.tau2,
            SbcParameter::Sigma2 => s.sigma2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SbcParameter::BetaAllSlope => "beta_all[1]",
            SbcParameter::Tau2 => "tau2",
            SbcParameter::Sigma2 => "sigma2",
        }
    }
}

/// Design of a calibration study.
#[derive(Clone, Debug, PartialEq)]
pub struct SbcDesign {
    pub covariates: CovariateSeries,
    pub ensemble_size: u32,
    /// Prior shared by the data-generating draw and the sampler.
    pub prior: PriorConfig,
    /// Sampler settings; the seed is replaced per replicate.
    pub sampler: SamplerConfig,
}

impl SbcDesign {
    /// Prior used for calibration: unit-scale coefficients and variances
    /// uniform on (0.1, 5), with a logit bound of 10.
    pub fn default_prior() -> PriorConfig {
        PriorConfig {
            beta_sd: 1.0,
            var_lower: 0.1,
            var_upper: 5.0,
            cauchy_scale: 1.0,
            logit_bound: LogitBound::Symmetric(10.0),
        }
    }
}

/// Ranks of the true values among the retained draws of one replicate.
#[derive(Clone, Debug, PartialEq)]
pub struct SbcReplicate {
    pub truth: ParamState,
    /// One rank per entry of [`SbcParameter::EVERY`], each in `0..=draws`.
    pub ranks: [usize; 3],
    pub draws: usize,
}

/// Runs replicate `index`: prior draw, panel, sampler, ranks.
pub fn sbc_replicate(design: &SbcDesign, master_seed: u64, index: usize) -> Result<SbcReplicate> {
    let wrap = |e: Error| Error::Replicate {
        index,
        source: alloc::boxed::Box::new(e),
    };
    let seed = split_seed(master_seed, index as u64);
    let mut rng = chain_rng(seed, 0);
    let t_len = design.covariates.len();
    let truth = draw_from_prior(&mut rng, &design.prior, &design.covariates, 100_000).map_err(wrap)?;
    let spec = GeneratorSpec {
        years: (0..t_len as i32).collect(),
        ensemble_sizes: vec![design.ensemble_size; t_len],
        true_state: truth.clone(),
        covariates: design.covariates.clone(),
        seed: split_seed(seed, 1),
    };
    let panel = generate_panel(&spec).map_err(wrap)?;
    let config = SamplerConfig {
        seed: split_seed(seed, 2),
        chain: 0,
        ..design.sampler.clone()
    };
    let draws = run_sampler(&panel, &design.covariates, &design.prior, &config).map_err(wrap)?;
    let ranks = SbcParameter::EVERY.map(|p| {
        let v = p.value(&truth);
        draws.states.iter().filter(|s| p.value(s) < v).count()
    });
    Ok(SbcReplicate {
        truth,
        ranks,
        draws: draws.states.len(),
    })
}

/// Runs `replicates` independent replicates.
pub fn sbc_run(design: &SbcDesign, master_seed: u64, replicates: usize) -> Result<Vec<SbcReplicate>> {
    if replicates < 20 {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least 20 replicates, got {replicates}"
        )));
    }
    (0..replicates)
        .map(|i| sbc_replicate(design, master_seed, i))
        .collect()
}

/// Chi-squared goodness-of-fit p-value for uniformity of ranks in
/// `0..=draws` over `bins` equal-probability bins.
pub fn rank_uniformity_pvalue(ranks: &[usize], draws: usize, bins: usize) -> Result<f64> {
    let outcomes = draws + 1;
    if bins < 2 || !outcomes.is_multiple_of(bins) {
        return Err(Error::InvalidArgument(format!(
            "{outcomes} rank values cannot be split into {bins} equal bins"
        )));
    }
    if ranks.is_empty() || ranks.iter().any(|&r| r > draws) {
        return Err(Error::InvalidArgument("ranks must lie in 0..=draws".into()));
    }
    let width = outcomes / bins;
    let mut counts = vec![0usize; bins];
    for &r in ranks {
        counts[r / width] += 1;
    }
    let expected = ranks.len() as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    Ok(math::chi_squared_sf(stat, (bins - 1) as f64))
}
