//! Orchestration of a fit: load and cross-check inputs, sample, summarize.

use std::path::PathBuf;

use eventrisk_core::analysis::{
    exceedance_pi, sigma_summary, summarize_series, Criterion, Levels, PiEstimate, Quantity, RiskSeries, Summary,
};
use eventrisk_core::{run_sampler, CountPanel, CovariateSeries, EventType, PosteriorDraws, PriorConfig, SamplerConfig, Scenario};

use crate::bounds::load_bounds;
use crate::covariates::load_covariates;
use crate::error::{AppError, AppResult};
use crate::manifest::{Manifest, Reference};
use crate::region::{load_region, RegionMeta};

/// Everything a fit needs, loaded and checked against each other.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub region: String,
    pub event_type: EventType,
    pub panel: CountPanel,
    pub covariates: CovariateSeries,
    pub meta: RegionMeta,
    pub prior: PriorConfig,
    pub criteria: Vec<Criterion>,
    /// Reference covariates `(x*_ALL, x*_NAT)` and the years they average.
    pub x_star: (f64, f64),
    pub reference_years: (i32, i32),
    pub input_files: Vec<(String, PathBuf)>,
}

pub fn prepare(m: &Manifest) -> AppResult<Prepared> {
    let event = m.event_type()?;
    let criteria = m.criteria()?;
    m.levels.validate().map_err(|e| AppError::Config(e.to_string()))?;
    let region_file = m.region_file()?.to_path_buf();
    let covariate_file = m.covariate_file()?.to_path_buf();

    let (panel, meta) = load_region(&region_file, event)?;
    let covariates = load_covariates(&covariate_file)?.series_for(panel.years())?;
    let region = m.region.clone().unwrap_or_else(|| meta.region.clone());
    let mut input_files = vec![
        ("region_file".to_string(), region_file),
        ("covariate_file".to_string(), covariate_file),
    ];
    let file_limit = match &m.bounds_file {
        Some(p) => {
            input_files.push(("bounds_file".to_string(), p.clone()));
            Some(load_bounds(p)?.limit(&region, event)?)
        }
        None => None,
    };
    let prior = m.prior(file_limit)?;

    let years = panel.years();
    let (lo, hi) = match m.reference {
        Reference::LastYears(n) => {
            if n == 0 || n > years.len() {
                return Err(AppError::Config(format!(
                    "reference window of {n} years does not fit {} years of data",
                    years.len()
                )));
            }
            (years.len() - n, years.len() - 1)
        }
        Reference::Years(a, b) => {
            let first = years[0];
            if a < first || b > years[years.len() - 1] {
                return Err(AppError::Mismatch(format!(
                    "reference years {a}-{b} are outside the data ({first}-{})",
                    years[years.len() - 1]
                )));
            }
            ((a - first) as usize, (b - first) as usize)
        }
    };
    let window = |k: Scenario| {
        let v = &covariates.values(k)[lo..=hi];
        v.iter().sum::<f64>() / v.len() as f64
    };
    let x_star = (window(Scenario::All), window(Scenario::Nat));

    Ok(Prepared {
        region,
        event_type: event,
        reference_years: (years[lo], years[hi]),
        panel,
        covariates,
        meta,
        prior,
        criteria,
        x_star,
        input_files,
    })
}

/// Posterior summaries of one fit.
#[derive(Clone, Debug)]
pub struct FitResults {
    pub prepared: Prepared,
    pub config: SamplerConfig,
    pub chains: u64,
    pub levels: Levels,
    pub draws: PosteriorDraws,
    /// One series per [`Quantity`], in `Quantity::EVERY` order.
    pub series: Vec<RiskSeries>,
    pub sigma: Summary,
    pub sigma2: Summary,
    pub pi: Vec<PiEstimate>,
    pub write_draws: bool,
}

/// Runs `chains` chains on consecutive streams, one thread each, and
/// concatenates their draws in chain order.
pub fn sample(p: &Prepared, config: &SamplerConfig, chains: u64) -> AppResult<PosteriorDraws> {
    let parts: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..chains)
            .map(|c| {
                let cfg = SamplerConfig {
                    chain: config.chain + c,
                    ..config.clone()
                };
                s.spawn(move || run_sampler(&p.panel, &p.covariates, &p.prior, &cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler thread panicked")).collect()
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>, _>>().map_err(AppError::Sampler)?;
    PosteriorDraws::merge(parts).map_err(AppError::Sampler)
}

pub fn summarize(
    prepared: Prepared,
    config: SamplerConfig,
    chains: u64,
    levels: Levels,
    draws: PosteriorDraws,
) -> AppResult<FitResults> {
    let states = &draws.states;
    let p = &prepared;
    let series = Quantity::EVERY
        .iter()
        .map(|&q| summarize_series(states, &p.covariates, p.panel.years(), q, p.x_star, levels))
        .collect::<Result<Vec<_>, _>>()
        .map_err(AppError::Sampler)?;
    let sigma = sigma_summary(states, levels).map_err(AppError::Sampler)?;
    let sigma2 = Summary::of(&draws.column(|s| s.sigma2), levels).map_err(AppError::Sampler)?;
    let pi = p
        .criteria
        .iter()
        .map(|&c| exceedance_pi(states, p.x_star.0, p.x_star.1, c, levels))
        .collect::<Result<Vec<_>, _>>()
        .map_err(AppError::Sampler)?;
    Ok(FitResults {
        prepared,
        config,
        chains,
        levels,
        draws,
        series,
        sigma,
        sigma2,
        pi,
        write_draws: false,
    })
}

/// Loads, samples and summarizes without writing anything.
pub fn run_fit(m: &Manifest) -> AppResult<FitResults> {
    let config = m.sampler_config()?;
    let prepared = prepare(m)?;
    let draws = sample(&prepared, &config, m.chains)?;
    let mut r = summarize(prepared, config, m.chains, m.levels, draws)?;
    r.write_draws = m.write_draws;
    Ok(r)
}
