//! Componentwise interweaving MCMC sampler.
//!
//! One iteration runs, in order:
//!
//! 1. blocked random-walk Metropolis on each `(alpha[t], delta[t])`;
//! 2. random-walk Metropolis on each `gamma[j]` with a re-centring proposal;
//! 3. regression coefficients, first by blocked Metropolis with the year
//!    effects held fixed, then by conjugate Gibbs with the latent year
//!    levels `eta[t] = x_N[t] b_N + alpha[t]` and
//!    `nu[t] = x_A[t] b_A + alpha[t] + delta[t]` held fixed;
//! 4. the two year-effect variances, first by Metropolis with the
//!    standardized effects `kappa = alpha / tau`, `xi = delta / sigma` held
//!    fixed, then by Metropolis given the effects themselves;
//! 5. `omega2` given `gamma`.
//!
//! Variances are updated on the log scale. Proposal sds are tuned in short
//! preliminary cycles and then frozen; the main run starts from the last
//! tuning state.

mod gibbs;
mod kernels;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{
    log_gamma_prior, log_likelihood, log_prior, min_max, CountPanel, CovariateSeries, EventType,
    LogitBound, ParamState, PriorConfig, Scenario, MONTHS,
};
use crate::rng::{chain_rng, ChainRng};

pub use gibbs::{beta_posterior, gibbs_beta, RegressionPosterior};
pub use kernels::{
    metropolis_accept, propose_gamma, recentred_gamma, rwmh_block, Proposal, RwmhOutcome,
};

/// Which sub-steps of an iteration run. Disabled blocks keep their current
/// values; used for reduced models and ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepMask {
    pub year_effects: bool,
    pub month_effects: bool,
    pub beta_ancillary: bool,
    pub beta_sufficient: bool,
    pub variances_ancillary: bool,
    pub variances_sufficient: bool,
    pub omega2: bool,
}

impl StepMask {
    pub const ALL: StepMask = StepMask {
        year_effects: true,
        month_effects: true,
        beta_ancillary: true,
        beta_sufficient: true,
        variances_ancillary: true,
        variances_sufficient: true,
        omega2: true,
    };

    pub const NONE: StepMask = StepMask {
        year_effects: false,
        month_effects: false,
        beta_ancillary: false,
        beta_sufficient: false,
        variances_ancillary: false,
        variances_sufficient: false,
        omega2: false,
    };
}

impl Default for StepMask {
    fn default() -> Self {
        StepMask::ALL
    }
}

/// Form of the conjugate regression update given the latent year levels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SufficientBetaForm {
    /// `b_A | b_N, eta, nu` then `b_N | b_A, eta, nu`. Each draw is an
    /// exact full conditional, so the update leaves the posterior invariant.
    #[default]
    Conditional,
    /// `b_A` regressed on `nu` with variance `tau2 + sigma2` and `b_N` on
    /// `eta` with variance `tau2`, treating `eta` and `nu` as independent.
    /// They are not (they share `alpha`), so this form is only approximately
    /// invariant. Kept for comparison.
    IndependentMarginals,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerConfig {
    /// Post-tuning iterations.
    pub iterations: usize,
    /// First retained iteration (0 keeps the post-tuning starting state).
    pub burn_in: usize,
    pub thin: usize,
    pub tune_cycles: usize,
    pub tune_iterations: Vec<usize>,
    /// Acceptance band the tuner aims for.
    pub target_accept: (f64, f64),
    pub prop_corr_alpha_delta: f64,
    pub prop_corr_beta_all: f64,
    pub prop_corr_beta_nat: f64,
    pub seed: u64,
    /// Stream index under `seed`.
    pub chain: u64,
    pub steps: StepMask,
    pub sufficient_beta: SufficientBetaForm,
}

/// Multiplicative sd adjustment per out-of-band tuning cycle, `exp(0.3)`.
pub const TUNE_LOG_STEP: f64 = 0.3;

impl SamplerConfig {
    /// Defaults of the reference implementation with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            iterations: 10_000,
            burn_in: 0,
            thin: 1,
            tune_cycles: 6,
            tune_iterations: vec![400, 400, 400, 800, 800, 800],
            target_accept: (0.3, 0.4),
            prop_corr_alpha_delta: -0.98,
            prop_corr_beta_all: 0.0,
            prop_corr_beta_nat: 0.0,
            seed,
            chain: 0,
            steps: StepMask::ALL,
            sufficient_beta: SufficientBetaForm::Conditional,
        }
    }

    /// Defaults plus the event-specific regression proposal correlations.
    pub fn for_event(event: EventType, seed: u64) -> Self {
        let (a, n) = event.default_beta_correlations();
        Self {
            prop_corr_beta_all: a,
            prop_corr_beta_nat: n,
            ..Self::with_seed(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if self.burn_in >= self.iterations {
            return bad(format!(
                "burn_in {} must be below iterations {}",
                self.burn_in, self.iterations
            ));
        }
        if self.thin == 0 {
            return bad("thin must be positive".into());
        }
        if self.tune_cycles == 0 {
            return bad("tune_cycles must be positive".into());
        }
        if self.tune_iterations.len() != self.tune_cycles {
            return bad(format!(
                "{} tuning cycles but {} cycle lengths",
                self.tune_cycles,
                self.tune_iterations.len()
            ));
        }
        if self.tune_iterations.contains(&0) {
            return bad("every tuning cycle needs at least one iteration".into());
        }
        let (lo, hi) = self.target_accept;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return bad(format!("target acceptance band ({lo}, {hi}) is not inside (0, 1)"));
        }
        for (name, r) in [
            ("prop_corr_alpha_delta", self.prop_corr_alpha_delta),
            ("prop_corr_beta_all", self.prop_corr_beta_all),
            ("prop_corr_beta_nat", self.prop_corr_beta_nat),
        ] {
            if !(r.abs() < 1.0) {
                return bad(format!("{name} = {r} must lie in (-1, 1)"));
            }
        }
        Ok(())
    }

    /// Number of states the main run keeps.
    pub fn retained_count(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin + 1
    }
}

/// A Metropolis-updated parameter block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Block {
    YearEffects(usize),
    MonthEffect(usize),
    BetaAll,
    BetaNat,
    Tau2Ancillary,
    Sigma2Ancillary,
    Tau2Sufficient,
    Sigma2Sufficient,
    Omega2,
}

impl Block {
    pub fn label(self) -> String {
        match self {
            Block::YearEffects(t) => format!("alpha_delta[{t}]"),
            Block::MonthEffect(j) => format!("gamma[{j}]"),
            Block::BetaAll => "beta_all".into(),
            Block::BetaNat => "beta_nat".into(),
            Block::Tau2Ancillary => "tau2_ancillary".into(),
            Block::Sigma2Ancillary => "sigma2_ancillary".into(),
            Block::Tau2Sufficient => "tau2_sufficient".into(),
            Block::Sigma2Sufficient => "sigma2_sufficient".into(),
            Block::Omega2 => "omega2".into(),
        }
    }

    /// Blocks updated under `mask`, in sweep order.
    pub fn active(n_years: usize, mask: &StepMask) -> Vec<Block> {
        let mut out = Vec::new();
        if mask.year_effects {
            out.extend((0..n_years).map(Block::YearEffects));
        }
        if mask.month_effects {
            out.extend((0..MONTHS).map(Block::MonthEffect));
        }
        if mask.beta_ancillary {
            out.extend([Block::BetaAll, Block::BetaNat]);
        }
        if mask.variances_ancillary {
            out.extend([Block::Tau2Ancillary, Block::Sigma2Ancillary]);
        }
        if mask.variances_sufficient {
            out.extend([Block::Tau2Sufficient, Block::Sigma2Sufficient]);
        }
        if mask.omega2 {
            out.push(Block::Omega2);
        }
        out
    }
}

/// One value per Metropolis block.
#[derive(Clone, Debug, PartialEq)]
struct PerBlock<T> {
    year_effects: Vec<T>,
    month_effects: [T; MONTHS],
    beta_all: T,
    beta_nat: T,
    tau2_ancillary: T,
    sigma2_ancillary: T,
    tau2_sufficient: T,
    sigma2_sufficient: T,
    omega2: T,
}

impl<T: Clone> PerBlock<T> {
    fn filled(n_years: usize, v: T) -> Self {
        Self {
            year_effects: vec![v.clone(); n_years],
            month_effects: core::array::from_fn(|_| v.clone()),
            beta_all: v.clone(),
            beta_nat: v.clone(),
            tau2_ancillary: v.clone(),
            sigma2_ancillary: v.clone(),
            tau2_sufficient: v.clone(),
            sigma2_sufficient: v.clone(),
            omega2: v,
        }
    }
}

impl<T> PerBlock<T> {
    fn get(&self, b: Block) -> &T {
        match b {
            Block::YearEffects(t) => &self.year_effects[t],
            Block::MonthEffect(j) => &self.month_effects[j],
            Block::BetaAll => &self.beta_all,
            Block::BetaNat => &self.beta_nat,
            Block::Tau2Ancillary => &self.tau2_ancillary,
            Block::Sigma2Ancillary => &self.sigma2_ancillary,
            Block::Tau2Sufficient => &self.tau2_sufficient,
            Block::Sigma2Sufficient => &self.sigma2_sufficient,
            Block::Omega2 => &self.omega2,
        }
    }

    fn get_mut(&mut self, b: Block) -> &mut T {
        match b {
            Block::YearEffects(t) => &mut self.year_effects[t],
            Block::MonthEffect(j) => &mut self.month_effects[j],
            Block::BetaAll => &mut self.beta_all,
            Block::BetaNat => &mut self.beta_nat,
            Block::Tau2Ancillary => &mut self.tau2_ancillary,
            Block::Sigma2Ancillary => &mut self.sigma2_ancillary,
            Block::Tau2Sufficient => &mut self.tau2_sufficient,
            Block::Sigma2Sufficient => &mut self.sigma2_sufficient,
            Block::Omega2 => &mut self.omega2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Tally {
    accepted: u64,
    proposed: u64,
}

impl Tally {
    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// A per-block number (acceptance rate or proposal sd).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockStat {
    pub block: Block,
    pub value: f64,
}

/// Diagnostics of one chain.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainDiagnostics {
    pub chain: u64,
    pub retained: usize,
    /// Main-run acceptance fraction of each active block.
    pub acceptance_rates: Vec<BlockStat>,
    /// Frozen proposal sds used in the main run.
    pub proposal_sds: Vec<BlockStat>,
    /// Acceptance fractions observed in each tuning cycle.
    pub tuning_rates: Vec<Vec<BlockStat>>,
}

/// Retained states plus sampler metadata. Multiple chains are merged by
/// concatenating their states in chain order.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorDraws {
    pub states: Vec<ParamState>,
    pub chains: Vec<ChainDiagnostics>,
    pub config_echo: SamplerConfig,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Values of one scalar function of the state across draws.
    pub fn column(&self, f: impl Fn(&ParamState) -> f64) -> Vec<f64> {
        self.states.iter().map(f).collect()
    }

    pub fn merge(parts: Vec<PosteriorDraws>) -> Result<PosteriorDraws> {
        let mut iter = parts.into_iter();
        let mut out = iter
            .next()
            .ok_or_else(|| Error::InvalidArgument("no chains to merge".into()))?;
        for p in iter {
            out.states.extend(p.states);
            out.chains.extend(p.chains);
        }
        Ok(out)
    }
}

/// The latent year levels of the two augmentations.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedLatents {
    /// `x_N[t] b_N + alpha[t]`
    pub eta: Vec<f64>,
    /// `x_A[t] b_A + alpha[t] + delta[t]`
    pub nu: Vec<f64>,
    /// `alpha[t] / tau`
    pub kappa: Vec<f64>,
    /// `delta[t] / sigma`
    pub xi: Vec<f64>,
}

impl AugmentedLatents {
    pub fn from_state(state: &ParamState, covs: &CovariateSeries) -> Self {
        let n = state.n_years();
        let tau = math::sqrt(state.tau2);
        let sigma = math::sqrt(state.sigma2);
        let (ba, bn) = (state.beta_all, state.beta_nat);
        Self {
            eta: (0..n)
                .map(|t| bn[0] + bn[1] * covs.x(Scenario::Nat, t) + state.alpha[t])
                .collect(),
            nu: (0..n)
                .map(|t| ba[0] + ba[1] * covs.x(Scenario::All, t) + state.alpha[t] + state.delta[t])
                .collect(),
            kappa: state.alpha.iter().map(|a| a / tau).collect(),
            xi: state.delta.iter().map(|d| d / sigma).collect(),
        }
    }

    /// Largest absolute gap between `eta`, `nu` and their values implied by
    /// `state`.
    pub fn level_error(&self, state: &ParamState, covs: &CovariateSeries) -> f64 {
        let other = Self::from_state(state, covs);
        max_abs_diff(&self.eta, &other.eta).max(max_abs_diff(&self.nu, &other.nu))
    }

    /// Largest absolute gap between `alpha`, `delta` in `state` and
    /// `kappa * tau`, `xi * sigma` at the given standard deviations.
    pub fn scale_error(&self, state: &ParamState, tau: f64, sigma: f64) -> f64 {
        let a: Vec<f64> = self.kappa.iter().map(|k| k * tau).collect();
        let d: Vec<f64> = self.xi.iter().map(|x| x * sigma).collect();
        max_abs_diff(&a, &state.alpha).max(max_abs_diff(&d, &state.delta))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Intermediate values of one iteration, for checking the augmentation
/// identities.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    /// Levels computed after the Metropolis regression update.
    pub levels: AugmentedLatents,
    /// State after the Gibbs regression update and back-solve.
    pub after_gibbs: ParamState,
    /// Standardized effects computed from `after_gibbs`.
    pub standardized: AugmentedLatents,
    /// State after the ancillary variance update.
    pub after_ancillary: ParamState,
}

/// Panel data as floating point, laid out for the inner loops.
struct Data {
    z_all: Vec<[f64; MONTHS]>,
    z_nat: Vec<[f64; MONTHS]>,
    n: Vec<f64>,
    x_all: Vec<f64>,
    x_nat: Vec<f64>,
}

impl Data {
    fn new(panel: &CountPanel, covs: &CovariateSeries) -> Self {
        let conv = |rows: &[[u32; MONTHS]]| -> Vec<[f64; MONTHS]> {
            rows.iter()
                .map(|r| core::array::from_fn(|j| r[j] as f64))
                .collect()
        };
        Self {
            z_all: conv(panel.counts(Scenario::All)),
            z_nat: conv(panel.counts(Scenario::Nat)),
            n: panel.ensemble_sizes().iter().map(|&n| n as f64).collect(),
            x_all: covs.values(Scenario::All).to_vec(),
            x_nat: covs.values(Scenario::Nat).to_vec(),
        }
    }

    fn len(&self) -> usize {
        self.n.len()
    }
}

/// Binomial log-likelihood of one year-row without the combinatorial term.
#[inline]
fn row_ll(z: &[f64; MONTHS], n: f64, offset: f64, gamma: &[f64; MONTHS]) -> f64 {
    let mut s = 0.0;
    for j in 0..MONTHS {
        let eta = offset + gamma[j];
        s += z[j] * eta - n * math::softplus(eta);
    }
    s
}

/// Offsets of one year must keep every monthly logit inside the bound.
#[inline]
fn within(bound: Option<f64>, lo: f64, hi: f64) -> bool {
    match bound {
        None => true,
        Some(l) => lo > -l && hi < l,
    }
}

#[inline]
fn log_normal0(x: f64, var: f64) -> f64 {
    -0.5 * (x * x / var + math::ln(var))
}

/// Deterministic starting state: zero effects, pooled-frequency intercepts,
/// zero slopes, unit variances (or the support midpoint if 1 is outside it).
pub fn initial_state(panel: &CountPanel, prior: &PriorConfig) -> ParamState {
    let mut s = ParamState::zeros(panel.n_years());
    for k in Scenario::BOTH {
        let (events, trials) = panel.pooled_frequency(k);
        let p = (events as f64 + 0.5) / (trials as f64 + 1.0);
        let mut b0 = math::logit(p).unwrap_or(0.0);
        if let LogitBound::Symmetric(l) = prior.logit_bound {
            let m = (l - 1.0).max(0.0);
            b0 = b0.clamp(-m, m);
        }
        match k {
            Scenario::All => s.beta_all[0] = b0,
            Scenario::Nat => s.beta_nat[0] = b0,
        }
    }
    if !(prior.var_lower < 1.0 && 1.0 < prior.var_upper) {
        let mid = 0.5 * (prior.var_lower + prior.var_upper);
        s.tau2 = mid;
        s.sigma2 = mid;
    }
    s
}

/// A single Markov chain with its proposal scales.
pub struct Chain<'a> {
    panel: &'a CountPanel,
    covs: &'a CovariateSeries,
    prior: PriorConfig,
    config: SamplerConfig,
    data: Data,
    bound: Option<f64>,
    state: ParamState,
    sds: PerBlock<f64>,
    tally: PerBlock<Tally>,
    active: Vec<Block>,
    rng: ChainRng,
    ll_all: Vec<f64>,
    ll_nat: Vec<f64>,
    scratch_all: Vec<f64>,
    scratch_nat: Vec<f64>,
    offsets_all: Vec<f64>,
    offsets_nat: Vec<f64>,
    y: Vec<f64>,
}

impl<'a> Chain<'a> {
    /// Chain from the default starting state.
    pub fn new(
        panel: &'a CountPanel,
        covs: &'a CovariateSeries,
        prior: PriorConfig,
        config: SamplerConfig,
    ) -> Result<Self> {
        let init = initial_state(panel, &prior);
        Self::from_state(panel, covs, prior, config, init)
    }

    pub fn from_state(
        panel: &'a CountPanel,
        covs: &'a CovariateSeries,
        prior: PriorConfig,
        config: SamplerConfig,
        state: ParamState,
    ) -> Result<Self> {
        prior.validate()?;
        config.validate()?;
        let t = panel.n_years();
        if covs.len() != t || state.n_years() != t {
            return Err(Error::InvalidArgument(format!(
                "panel has {t} years, covariates {}, state {}",
                covs.len(),
                state.n_years()
            )));
        }
        state.validate()?;
        check_start(&state, panel, covs, &prior)?;

        let data = Data::new(panel, covs);
        let mut chain = Self {
            panel,
            covs,
            bound: prior.logit_bound.limit(),
            prior,
            active: Block::active(t, &config.steps),
            rng: chain_rng(config.seed, config.chain),
            config,
            data,
            state,
            sds: PerBlock::filled(t, 1.0),
            tally: PerBlock::filled(t, Tally::default()),
            ll_all: vec![0.0; t],
            ll_nat: vec![0.0; t],
            scratch_all: vec![0.0; t],
            scratch_nat: vec![0.0; t],
            offsets_all: vec![0.0; t],
            offsets_nat: vec![0.0; t],
            y: vec![0.0; t],
        };
        chain.refresh_likelihood();
        chain.sds = chain.initial_sds();
        Ok(chain)
    }

    pub fn state(&self) -> &ParamState {
        &self.state
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Current proposal sd of `block`.
    pub fn proposal_sd(&self, block: Block) -> f64 {
        *self.sds.get(block)
    }

    pub fn set_proposal_sd(&mut self, block: Block, sd: f64) {
        *self.sds.get_mut(block) = sd;
    }

    pub fn active_blocks(&self) -> &[Block] {
        &self.active
    }

    /// Acceptance fractions since the last reset.
    pub fn acceptance_rates(&self) -> Vec<BlockStat> {
        self.active
            .iter()
            .map(|&b| BlockStat {
                block: b,
                value: self.tally.get(b).rate(),
            })
            .collect()
    }

    pub fn proposal_sds(&self) -> Vec<BlockStat> {
        self.active
            .iter()
            .map(|&b| BlockStat {
                block: b,
                value: *self.sds.get(b),
            })
            .collect()
    }

    pub fn reset_tallies(&mut self) {
        self.tally = PerBlock::filled(self.data.len(), Tally::default());
    }

    /// Runs the tuning cycles; returns the acceptance fractions of each.
    pub fn tune(&mut self) -> Vec<Vec<BlockStat>> {
        let (lo, hi) = self.config.target_accept;
        let cycles = self.config.tune_iterations.clone();
        let mut history = Vec::with_capacity(cycles.len());
        for n in cycles {
            self.reset_tallies();
            for _ in 0..n {
                self.iterate();
            }
            let rates = self.acceptance_rates();
            for r in &rates {
                let sd = self.sds.get_mut(r.block);
                if r.value > hi {
                    *sd *= math::exp(TUNE_LOG_STEP);
                } else if r.value < lo {
                    *sd *= math::exp(-TUNE_LOG_STEP);
                }
            }
            history.push(rates);
        }
        if let Some(last) = history.last() {
            let misses: Vec<&BlockStat> = last
                .iter()
                .filter(|r| r.value < lo || r.value > hi)
                .collect();
            if !misses.is_empty() {
                log::warn!(
                    "{} of {} blocks ended tuning outside the band ({lo}, {hi}), e.g. {} at {:.3}",
                    misses.len(),
                    last.len(),
                    misses[0].block.label(),
                    misses[0].value
                );
            }
        }
        self.reset_tallies();
        history
    }

    /// One full sweep.
    pub fn iterate(&mut self) {
        self.sweep(None);
    }

    /// One full sweep, recording the augmentation intermediates.
    pub fn iterate_traced(&mut self) -> IterationTrace {
        let mut trace = IterationTrace {
            levels: AugmentedLatents::from_state(&self.state, self.covs),
            after_gibbs: self.state.clone(),
            standardized: AugmentedLatents::from_state(&self.state, self.covs),
            after_ancillary: self.state.clone(),
        };
        self.sweep(Some(&mut trace));
        trace
    }

    /// Tunes, then runs the main phase and collects retained states.
    pub fn run(mut self) -> PosteriorDraws {
        let tuning_rates = self.tune();
        let cfg = self.config.clone();
        let mut states = Vec::with_capacity(cfg.retained_count());
        if cfg.burn_in == 0 {
            states.push(self.state.clone());
        }
        for i in 1..=cfg.iterations {
            self.iterate();
            if i >= cfg.burn_in && (i - cfg.burn_in).is_multiple_of(cfg.thin) {
                states.push(self.state.clone());
            }
        }
        let diagnostics = ChainDiagnostics {
            chain: cfg.chain,
            retained: states.len(),
            acceptance_rates: self.acceptance_rates(),
            proposal_sds: self.proposal_sds(),
            tuning_rates,
        };
        PosteriorDraws {
            states,
            chains: vec![diagnostics],
            config_echo: cfg,
        }
    }

    /// Exact log posterior (up to a constant) at the current state.
    pub fn log_posterior(&self) -> f64 {
        log_likelihood(&self.state, self.panel, self.covs).unwrap_or(f64::NEG_INFINITY)
            + log_prior(&self.state, &self.prior, self.covs)
    }

    /// Largest gap between the cached per-year likelihoods and a fresh
    /// evaluation.
    pub fn cache_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 0..self.data.len() {
            let (a, n) = self.row_lls(t, &self.state);
            worst = worst
                .max((a - self.ll_all[t]).abs())
                .max((n - self.ll_nat[t]).abs());
        }
        worst
    }

    fn row_lls(&self, t: usize, s: &ParamState) -> (f64, f64) {
        let d = &self.data;
        let oa = s.beta_all[0] + s.beta_all[1] * d.x_all[t] + s.alpha[t] + s.delta[t];
        let on = s.beta_nat[0] + s.beta_nat[1] * d.x_nat[t] + s.alpha[t];
        (
            row_ll(&d.z_all[t], d.n[t], oa, &s.gamma),
            row_ll(&d.z_nat[t], d.n[t], on, &s.gamma),
        )
    }

    fn refresh_likelihood(&mut self) {
        for t in 0..self.data.len() {
            let (a, n) = self.row_lls(t, &self.state);
            self.ll_all[t] = a;
            self.ll_nat[t] = n;
        }
    }

    fn total_ll(&self) -> f64 {
        self.ll_all.iter().sum::<f64>() + self.ll_nat.iter().sum::<f64>()
    }

    /// Proposal sds from the curvature of the log posterior at the current
    /// state; tuning refines them.
    fn initial_sds(&self) -> PerBlock<f64> {
        const SCALE: f64 = 2.38;
        let d = &self.data;
        let s = &self.state;
        let t_len = d.len();
        // Fisher information per (year, month) for each scenario.
        let mut info_all = vec![[0.0; MONTHS]; t_len];
        let mut info_nat = vec![[0.0; MONTHS]; t_len];
        for t in 0..t_len {
            let oa = s.year_offset(self.covs, Scenario::All, t);
            let on = s.year_offset(self.covs, Scenario::Nat, t);
            for j in 0..MONTHS {
                let pa = math::inv_logit(oa + s.gamma[j]);
                let pn = math::inv_logit(on + s.gamma[j]);
                info_all[t][j] = d.n[t] * pa * (1.0 - pa);
                info_nat[t][j] = d.n[t] * pn * (1.0 - pn);
            }
        }
        let year_all: Vec<f64> = info_all.iter().map(|r| r.iter().sum()).collect();
        let year_nat: Vec<f64> = info_nat.iter().map(|r| r.iter().sum()).collect();
        let sd_from = |curv: f64| SCALE / math::sqrt(curv.max(1e-8));

        let mut sds = PerBlock::filled(t_len, 1.0);
        let rho = self.config.prop_corr_alpha_delta;
        for t in 0..t_len {
            // Curvature along the correlated proposal: tr(H C).
            let h11 = year_all[t] + year_nat[t] + 1.0 / s.tau2;
            let h22 = year_all[t] + 1.0 / s.sigma2;
            let h12 = year_all[t];
            sds.year_effects[t] = sd_from(h11 + h22 + 2.0 * rho * h12);
        }
        let frac = 1.0 / MONTHS as f64;
        for j in 0..MONTHS {
            let mut curv = (1.0 - frac) / s.omega2;
            for t in 0..t_len {
                for i in 0..MONTHS {
                    let w = if i == j { 1.0 - frac } else { frac };
                    curv += (info_all[t][i] + info_nat[t][i]) * w * w;
                }
            }
            sds.month_effects[j] = sd_from(curv);
        }
        let beta_curv = |year_info: &[f64], x: &[f64], rho: f64| {
            let ridge = 1.0 / (self.prior.beta_sd * self.prior.beta_sd);
            let (mut h00, mut h01, mut h11) = (ridge, 0.0, ridge);
            for t in 0..t_len {
                h00 += year_info[t];
                h01 += year_info[t] * x[t];
                h11 += year_info[t] * x[t] * x[t];
            }
            h00 + h11 + 2.0 * rho * h01
        };
        sds.beta_all = sd_from(beta_curv(&year_all, &d.x_all, self.config.prop_corr_beta_all));
        sds.beta_nat = sd_from(beta_curv(&year_nat, &d.x_nat, self.config.prop_corr_beta_nat));
        // With effects of typical size sd, d alpha / d log tau2 = alpha / 2.
        let tau_info: f64 = (0..t_len)
            .map(|t| (year_all[t] + year_nat[t]) * s.tau2 / 4.0)
            .sum();
        let sigma_info: f64 = year_all.iter().map(|i| i * s.sigma2 / 4.0).sum();
        sds.tau2_ancillary = sd_from(tau_info + 0.5);
        sds.sigma2_ancillary = sd_from(sigma_info + 0.5);
        let sufficient = SCALE * math::sqrt(2.0 / t_len as f64);
        sds.tau2_sufficient = sufficient;
        sds.sigma2_sufficient = sufficient;
        sds.omega2 = SCALE * math::sqrt(2.0 / (MONTHS - 1) as f64);
        sds
    }

    fn sweep(&mut self, mut trace: Option<&mut IterationTrace>) {
        let steps = self.config.steps;
        if steps.year_effects {
            self.update_year_effects();
        }
        if steps.month_effects {
            self.update_month_effects();
        }
        if steps.beta_ancillary {
            self.update_beta_ancillary(Scenario::All);
            self.update_beta_ancillary(Scenario::Nat);
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.levels = AugmentedLatents::from_state(&self.state, self.covs);
        }
        if steps.beta_sufficient {
            self.update_beta_sufficient();
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.after_gibbs = self.state.clone();
            tr.standardized = AugmentedLatents::from_state(&self.state, self.covs);
        }
        if steps.variances_ancillary {
            self.update_variances_ancillary();
        }
        if let Some(tr) = trace {
            tr.after_ancillary = self.state.clone();
        }
        if steps.variances_sufficient {
            self.update_variances_sufficient();
        }
        if steps.omega2 {
            self.update_omega2();
        }
    }

    fn update_year_effects(&mut self) {
        let (gmin, gmax) = min_max(&self.state.gamma);
        let rho = self.config.prop_corr_alpha_delta;
        let (tau2, sigma2) = (self.state.tau2, self.state.sigma2);
        for t in 0..self.data.len() {
            let d = &self.data;
            let s = &self.state;
            let base_a = s.beta_all[0] + s.beta_all[1] * d.x_all[t];
            let base_n = s.beta_nat[0] + s.beta_nat[1] * d.x_nat[t];
            let cur = [s.alpha[t], s.delta[t]];
            let cur_lt = self.ll_all[t]
                + self.ll_nat[t]
                + log_normal0(cur[0], tau2)
                + log_normal0(cur[1], sigma2);
            let proposal = Proposal::correlated(self.sds.year_effects[t], rho);
            let bound = self.bound;
            let gamma = s.gamma;
            let mut rows = (0.0, 0.0);
            let out = rwmh_block(&mut self.rng, cur, cur_lt, &proposal, |p| {
                let oa = base_a + p[0] + p[1];
                let on = base_n + p[0];
                if !within(bound, oa.min(on) + gmin, oa.max(on) + gmax) {
                    return f64::NEG_INFINITY;
                }
                let la = row_ll(&d.z_all[t], d.n[t], oa, &gamma);
                let ln = row_ll(&d.z_nat[t], d.n[t], on, &gamma);
                rows = (la, ln);
                la + ln + log_normal0(p[0], tau2) + log_normal0(p[1], sigma2)
            });
            self.tally.year_effects[t].record(out.accepted);
            if out.accepted {
                self.state.alpha[t] = out.value[0];
                self.state.delta[t] = out.value[1];
                self.ll_all[t] = rows.0;
                self.ll_nat[t] = rows.1;
            }
        }
    }

    fn fill_offsets(&mut self) {
        for t in 0..self.data.len() {
            self.offsets_all[t] = self.state.year_offset(self.covs, Scenario::All, t);
            self.offsets_nat[t] = self.state.year_offset(self.covs, Scenario::Nat, t);
        }
    }

    fn update_month_effects(&mut self) {
        self.fill_offsets();
        let (lo_a, hi_a) = min_max(&self.offsets_all);
        let (lo_n, hi_n) = min_max(&self.offsets_nat);
        let (off_lo, off_hi) = (lo_a.min(lo_n), hi_a.max(hi_n));
        let omega2 = self.state.omega2;
        for j in 0..MONTHS {
            let cur_lt = self.total_ll() + log_gamma_prior(&self.state.gamma, omega2);
            let cand = propose_gamma(&mut self.rng, &self.state.gamma, j, self.sds.month_effects[j]);
            let (gmin, gmax) = min_max(&cand);
            let lt = if within(self.bound, off_lo + gmin, off_hi + gmax) {
                let d = &self.data;
                let mut total = 0.0;
                for t in 0..d.len() {
                    let la = row_ll(&d.z_all[t], d.n[t], self.offsets_all[t], &cand);
                    let ln = row_ll(&d.z_nat[t], d.n[t], self.offsets_nat[t], &cand);
                    self.scratch_all[t] = la;
                    self.scratch_nat[t] = ln;
                    total += la + ln;
                }
                total + log_gamma_prior(&cand, omega2)
            } else {
                f64::NEG_INFINITY
            };
            let accepted = metropolis_accept(&mut self.rng, cur_lt, lt);
            self.tally.month_effects[j].record(accepted);
            if accepted {
                self.state.gamma = cand;
                core::mem::swap(&mut self.ll_all, &mut self.scratch_all);
                core::mem::swap(&mut self.ll_nat, &mut self.scratch_nat);
            }
        }
    }

    fn update_beta_ancillary(&mut self, k: Scenario) {
        let (gmin, gmax) = min_max(&self.state.gamma);
        let d = &self.data;
        let s = &self.state;
        let (x, z, cur, sd, rho, cache) = match k {
            Scenario::All => (
                &d.x_all,
                &d.z_all,
                s.beta_all,
                self.sds.beta_all,
                self.config.prop_corr_beta_all,
                &self.ll_all,
            ),
            Scenario::Nat => (
                &d.x_nat,
                &d.z_nat,
                s.beta_nat,
                self.sds.beta_nat,
                self.config.prop_corr_beta_nat,
                &self.ll_nat,
            ),
        };
        let effect = |t: usize| match k {
            Scenario::All => s.alpha[t] + s.delta[t],
            Scenario::Nat => s.alpha[t],
        };
        let cur_lt = cache.iter().sum::<f64>() + self.prior.log_beta_prior(cur);
        let proposal = Proposal::correlated(sd, rho);
        let bound = self.bound;
        let prior = self.prior;
        let scratch = match k {
            Scenario::All => &mut self.scratch_all,
            Scenario::Nat => &mut self.scratch_nat,
        };
        let out = rwmh_block(&mut self.rng, cur, cur_lt, &proposal, |b| {
            let mut total = 0.0;
            for t in 0..d.len() {
                let o = b[0] + b[1] * x[t] + effect(t);
                if !within(bound, o + gmin, o + gmax) {
                    return f64::NEG_INFINITY;
                }
                let l = row_ll(&z[t], d.n[t], o, &s.gamma);
                scratch[t] = l;
                total += l;
            }
            total + prior.log_beta_prior(*b)
        });
        match k {
            Scenario::All => self.tally.beta_all.record(out.accepted),
            Scenario::Nat => self.tally.beta_nat.record(out.accepted),
        }
        if out.accepted {
            match k {
                Scenario::All => {
                    self.state.beta_all = out.value;
                    core::mem::swap(&mut self.ll_all, &mut self.scratch_all);
                }
                Scenario::Nat => {
                    self.state.beta_nat = out.value;
                    core::mem::swap(&mut self.ll_nat, &mut self.scratch_nat);
                }
            }
        }
    }

    fn update_beta_sufficient(&mut self) {
        let levels = AugmentedLatents::from_state(&self.state, self.covs);
        let (eta, nu) = (&levels.eta, &levels.nu);
        let (tau2, sigma2) = (self.state.tau2, self.state.sigma2);
        let beta_sd = self.prior.beta_sd;
        let d = &self.data;
        let n = d.len();
        // Every draw below has a proper normal prior, so the regression is
        // never singular.
        let (ba, bn) = match self.config.sufficient_beta {
            SufficientBetaForm::Conditional => {
                let bn_cur = self.state.beta_nat;
                for t in 0..n {
                    let alpha = eta[t] - bn_cur[0] - bn_cur[1] * d.x_nat[t];
                    self.y[t] = nu[t] - alpha;
                }
                let ba = gibbs_beta(&mut self.rng, &self.y, &d.x_all, sigma2, beta_sd)
                    .expect("proper prior keeps the precision positive definite");
                let w = 1.0 / tau2 + 1.0 / sigma2;
                for t in 0..n {
                    let r = nu[t] - ba[0] - ba[1] * d.x_all[t];
                    self.y[t] = (eta[t] / tau2 + (eta[t] - r) / sigma2) / w;
                }
                let bn = gibbs_beta(&mut self.rng, &self.y, &d.x_nat, 1.0 / w, beta_sd)
                    .expect("proper prior keeps the precision positive definite");
                (ba, bn)
            }
            SufficientBetaForm::IndependentMarginals => {
                let ba = gibbs_beta(&mut self.rng, nu, &d.x_all, tau2 + sigma2, beta_sd)
                    .expect("proper prior keeps the precision positive definite");
                let bn = gibbs_beta(&mut self.rng, eta, &d.x_nat, tau2, beta_sd)
                    .expect("proper prior keeps the precision positive definite");
                (ba, bn)
            }
        };
        let s = &mut self.state;
        for t in 0..n {
            let alpha = eta[t] - bn[0] - bn[1] * d.x_nat[t];
            s.alpha[t] = alpha;
            s.delta[t] = nu[t] - ba[0] - ba[1] * d.x_all[t] - alpha;
        }
        s.beta_all = ba;
        s.beta_nat = bn;
        // Logits are unchanged up to rounding; refresh so the cache stays
        // exact.
        self.refresh_likelihood();
    }

    fn update_variances_ancillary(&mut self) {
        let n = self.data.len();
        let tau = math::sqrt(self.state.tau2);
        let sigma = math::sqrt(self.state.sigma2);
        let kappa: Vec<f64> = self.state.alpha.iter().map(|a| a / tau).collect();
        let xi: Vec<f64> = self.state.delta.iter().map(|d| d / sigma).collect();
        let (gmin, gmax) = min_max(&self.state.gamma);
        let prior = self.prior;
        let bound = self.bound;

        // tau2: moves alpha = tau kappa, touching both scenarios.
        {
            let d = &self.data;
            let s = &self.state;
            let u = math::ln(s.tau2);
            let cur_lt = self.total_ll() + prior.log_variance_prior(s.tau2) + u;
            let (sa, sn) = (&mut self.scratch_all, &mut self.scratch_nat);
            let out = rwmh_block(
                &mut self.rng,
                [u],
                cur_lt,
                &Proposal::scalar(self.sds.tau2_ancillary),
                |p| {
                    let v = math::exp(p[0]);
                    let lp = prior.log_variance_prior(v);
                    if lp == f64::NEG_INFINITY {
                        return lp;
                    }
                    let tau = math::sqrt(v);
                    let mut total = 0.0;
                    for t in 0..n {
                        let a = tau * kappa[t];
                        let on = s.beta_nat[0] + s.beta_nat[1] * d.x_nat[t] + a;
                        let oa = s.beta_all[0] + s.beta_all[1] * d.x_all[t] + a + s.delta[t];
                        if !within(bound, oa.min(on) + gmin, oa.max(on) + gmax) {
                            return f64::NEG_INFINITY;
                        }
                        sa[t] = row_ll(&d.z_all[t], d.n[t], oa, &s.gamma);
                        sn[t] = row_ll(&d.z_nat[t], d.n[t], on, &s.gamma);
                        total += sa[t] + sn[t];
                    }
                    total + lp + p[0]
                },
            );
            self.tally.tau2_ancillary.record(out.accepted);
            if out.accepted {
                let v = math::exp(out.value[0]);
                let tau = math::sqrt(v);
                self.state.tau2 = v;
                for t in 0..n {
                    self.state.alpha[t] = tau * kappa[t];
                }
                core::mem::swap(&mut self.ll_all, &mut self.scratch_all);
                core::mem::swap(&mut self.ll_nat, &mut self.scratch_nat);
            }
        }

        // sigma2: moves delta = sigma xi, touching ALL only.
        {
            let d = &self.data;
            let s = &self.state;
            let u = math::ln(s.sigma2);
            let cur_lt =
                self.ll_all.iter().sum::<f64>() + prior.log_variance_prior(s.sigma2) + u;
            let sa = &mut self.scratch_all;
            let out = rwmh_block(
                &mut self.rng,
                [u],
                cur_lt,
                &Proposal::scalar(self.sds.sigma2_ancillary),
                |p| {
                    let v = math::exp(p[0]);
                    let lp = prior.log_variance_prior(v);
                    if lp == f64::NEG_INFINITY {
                        return lp;
                    }
                    let sigma = math::sqrt(v);
                    let mut total = 0.0;
                    for t in 0..n {
                        let oa = s.beta_all[0]
                            + s.beta_all[1] * d.x_all[t]
                            + s.alpha[t]
                            + sigma * xi[t];
                        if !within(bound, oa + gmin, oa + gmax) {
                            return f64::NEG_INFINITY;
                        }
                        sa[t] = row_ll(&d.z_all[t], d.n[t], oa, &s.gamma);
                        total += sa[t];
                    }
                    total + lp + p[0]
                },
            );
            self.tally.sigma2_ancillary.record(out.accepted);
            if out.accepted {
                let v = math::exp(out.value[0]);
                let sigma = math::sqrt(v);
                self.state.sigma2 = v;
                for t in 0..n {
                    self.state.delta[t] = sigma * xi[t];
                }
                core::mem::swap(&mut self.ll_all, &mut self.scratch_all);
            }
        }
    }

    /// Log-scale Metropolis update of a variance given `dim` centred normal
    /// effects with sum of squares `ss`.
    fn log_variance_step(
        rng: &mut ChainRng,
        current: f64,
        sd: f64,
        log_prior: impl Fn(f64) -> f64,
        dim: f64,
        ss: f64,
    ) -> (f64, bool) {
        let target = |u: f64| {
            let v = math::exp(u);
            let lp = log_prior(v);
            if lp == f64::NEG_INFINITY {
                return lp;
            }
            lp + u - 0.5 * dim * u - 0.5 * ss / v
        };
        let u = math::ln(current);
        let out = rwmh_block(rng, [u], target(u), &Proposal::scalar(sd), |p| target(p[0]));
        (math::exp(out.value[0]), out.accepted)
    }

    fn update_variances_sufficient(&mut self) {
        let prior = self.prior;
        let n = self.data.len() as f64;
        let ss_alpha: f64 = self.state.alpha.iter().map(|a| a * a).sum();
        let (v, acc) = Self::log_variance_step(
            &mut self.rng,
            self.state.tau2,
            self.sds.tau2_sufficient,
            |v| prior.log_variance_prior(v),
            n,
            ss_alpha,
        );
        self.state.tau2 = v;
        self.tally.tau2_sufficient.record(acc);

        let ss_delta: f64 = self.state.delta.iter().map(|d| d * d).sum();
        let (v, acc) = Self::log_variance_step(
            &mut self.rng,
            self.state.sigma2,
            self.sds.sigma2_sufficient,
            |v| prior.log_variance_prior(v),
            n,
            ss_delta,
        );
        self.state.sigma2 = v;
        self.tally.sigma2_sufficient.record(acc);
    }

    fn update_omega2(&mut self) {
        let prior = self.prior;
        let m = self.state.gamma.iter().sum::<f64>() / MONTHS as f64;
        let ss: f64 = self.state.gamma.iter().map(|g| (g - m) * (g - m)).sum();
        let (v, acc) = Self::log_variance_step(
            &mut self.rng,
            self.state.omega2,
            self.sds.omega2,
            |v| prior.log_omega2_prior(v),
            (MONTHS - 1) as f64,
            ss,
        );
        self.state.omega2 = v;
        self.tally.omega2.record(acc);
    }
}

/// Confirms the starting state has finite log posterior, naming the first
/// offending component otherwise.
fn check_start(
    state: &ParamState,
    panel: &CountPanel,
    covs: &CovariateSeries,
    prior: &PriorConfig,
) -> Result<()> {
    let fail = |component: String| Err(Error::NonFiniteStart { component });
    for (name, v) in [("tau2", state.tau2), ("sigma2", state.sigma2)] {
        if prior.log_variance_prior(v) == f64::NEG_INFINITY {
            return fail(format!("{name} = {v} outside the prior support"));
        }
    }
    if prior.log_omega2_prior(state.omega2) == f64::NEG_INFINITY {
        return fail(format!("omega2 = {} outside the prior support", state.omega2));
    }
    let (lo, hi) = state.logit_range(covs);
    if !prior.logit_bound.admits(lo, hi) {
        return fail(format!("monthly logits span ({lo}, {hi}), outside the logit bound"));
    }
    match log_likelihood(state, panel, covs) {
        Ok(v) if v.is_finite() => {}
        Ok(v) => return fail(format!("log-likelihood = {v}")),
        Err(e) => return Err(e),
    }
    if !log_prior(state, prior, covs).is_finite() {
        return fail("log prior".into());
    }
    Ok(())
}

/// Tunes and runs one chain from the default starting state.
pub fn run_sampler(
    panel: &CountPanel,
    covs: &CovariateSeries,
    prior: &PriorConfig,
    config: &SamplerConfig,
) -> Result<PosteriorDraws> {
    Ok(Chain::new(panel, covs, *prior, config.clone())?.run())
}

/// Runs `chains` chains on consecutive streams starting at `config.chain`
/// and concatenates their draws.
pub fn run_chains(
    panel: &CountPanel,
    covs: &CovariateSeries,
    prior: &PriorConfig,
    config: &SamplerConfig,
    chains: u64,
) -> Result<PosteriorDraws> {
    if chains == 0 {
        return Err(Error::InvalidConfig("at least one chain is required".into()));
    }
    let parts = (0..chains)
        .map(|c| {
            let cfg = SamplerConfig {
                chain: config.chain + c,
                ..config.clone()
            };
            run_sampler(panel, covs, prior, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    PosteriorDraws::merge(parts)
}
