//! Run manifest for `fit`: input files, model and sampler settings, and
//! the analysis to report.

use std::path::{Path, PathBuf};

use eventrisk_core::analysis::{Criterion, Levels};
use eventrisk_core::sampler::SufficientBetaForm;
use eventrisk_core::{EventType, LogitBound, PriorConfig, SamplerConfig};

use crate::error::{AppError, AppResult};
use crate::keyval::{self, parse_bool, parse_year_range, split_list};
use crate::table::read_text;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Greater,
    Less,
    Between,
}

/// Which years define the stationary reference covariate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    /// The last `n` years of the series.
    LastYears(usize),
    /// An inclusive calendar range.
    Years(i32, i32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub region_file: Option<PathBuf>,
    pub covariate_file: Option<PathBuf>,
    pub bounds_file: Option<PathBuf>,
    pub region: Option<String>,
    pub event_type: Option<EventType>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub tune_cycles: Option<usize>,
    pub tune_iterations: Option<Vec<usize>>,
    pub prop_corr_alpha_delta: f64,
    pub prop_corr_beta_all: Option<f64>,
    pub prop_corr_beta_nat: Option<f64>,
    pub logit_bound: Option<LogitBound>,
    pub beta_sd: f64,
    pub var_lower: f64,
    pub var_upper: f64,
    pub cauchy_scale: f64,
    pub cutoffs: Vec<f64>,
    pub direction: Direction,
    pub reference: Reference,
    pub levels: Levels,
    pub chains: u64,
    pub write_draws: bool,
    pub sufficient_beta: SufficientBetaForm,
}

impl Default for Manifest {
    fn default() -> Self {
        let prior = PriorConfig::default();
        Self {
            region_file: None,
            covariate_file: None,
            bounds_file: None,
            region: None,
            event_type: None,
            output_dir: None,
            seed: None,
            iterations: 10_000,
            burn_in: 0,
            thin: 1,
            tune_cycles: None,
            tune_iterations: None,
            prop_corr_alpha_delta: -0.98,
            prop_corr_beta_all: None,
            prop_corr_beta_nat: None,
            logit_bound: None,
            beta_sd: prior.beta_sd,
            var_lower: prior.var_lower,
            var_upper: prior.var_upper,
            cauchy_scale: prior.cauchy_scale,
            cutoffs: vec![1.0, 2.0, 10.0],
            direction: Direction::Greater,
            reference: Reference::LastYears(5),
            levels: Levels::default(),
            chains: 1,
            write_draws: false,
            sufficient_beta: SufficientBetaForm::Conditional,
        }
    }
}

/// Every key `set` understands.
pub const KEYS: &[&str] = &[
    "region_file",
    "covariate_file",
    "bounds_file",
    "region",
    "event_type",
    "output_dir",
    "seed",
    "iterations",
    "burn_in",
    "start_keep",
    "thin",
    "tune_cycles",
    "tune_iterations",
    "prop_corr_alpha_delta",
    "prop_corr_beta_all",
    "prop_corr_beta_nat",
    "logit_bound",
    "beta_sd",
    "var_lower",
    "var_upper",
    "cauchy_scale",
    "cutoffs",
    "direction",
    "reference_years",
    "reference_window",
    "levels",
    "chains",
    "write_draws",
    "sufficient_beta",
];

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    if v.contains(',') {
        return Err(format!("`{v}` contains a comma; the decimal separator must be a point"));
    }
    v.parse().map_err(|_| format!("`{v}` is not a valid number"))
}

fn real(v: &str) -> Result<f64, String> {
    let x: f64 = num(v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

impl Manifest {
    /// Reads a manifest file. Relative paths inside it are resolved against
    /// the manifest's directory.
    pub fn from_file(path: &Path) -> AppResult<Manifest> {
        let text = read_text(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn parse(text: &str, source: &str, base: &Path) -> AppResult<Manifest> {
        let mut m = Manifest::default();
        for e in keyval::parse(text, source)? {
            m.set(&e.key, &e.value, base)
                .map_err(|msg| AppError::Config(format!("{source}, line {}: {msg}", e.line)))?;
        }
        Ok(m)
    }

    /// Applies one setting. Relative paths are joined onto `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), String> {
        let path = |v: &str| base.join(v);
        let key = key.to_ascii_lowercase().replace('-', "_");
        let err = |m: String| format!("`{key}`: {m}");
        match key.as_str() {
            "region_file" => self.region_file = Some(path(value)),
            "covariate_file" => self.covariate_file = Some(path(value)),
            "bounds_file" => self.bounds_file = Some(path(value)),
            "output_dir" => self.output_dir = Some(path(value)),
            "region" => self.region = Some(value.to_string()),
            "event_type" => {
                self.event_type =
                    Some(EventType::parse(&value.to_ascii_lowercase()).map_err(|e| err(e.to_string()))?)
            }
            "seed" => self.seed = Some(num(value).map_err(err)?),
            "iterations" => self.iterations = num(value).map_err(err)?,
            "burn_in" => self.burn_in = num(value).map_err(err)?,
            "start_keep" => {
                let k: usize = num(value).map_err(err)?;
                if k == 0 {
                    return Err(err("start_keep counts from 1".into()));
                }
                self.burn_in = k - 1;
            }
            "thin" => self.thin = num(value).map_err(err)?,
            "tune_cycles" => self.tune_cycles = Some(num(value).map_err(err)?),
            "tune_iterations" => {
                self.tune_iterations = Some(
                    split_list(value)
                        .into_iter()
                        .map(num)
                        .collect::<Result<_, _>>()
                        .map_err(err)?,
                )
            }
            "prop_corr_alpha_delta" => self.prop_corr_alpha_delta = real(value).map_err(err)?,
            "prop_corr_beta_all" => self.prop_corr_beta_all = Some(real(value).map_err(err)?),
            "prop_corr_beta_nat" => self.prop_corr_beta_nat = Some(real(value).map_err(err)?),
            "logit_bound" => {
                self.logit_bound = Some(if value.eq_ignore_ascii_case("inactive") {
                    LogitBound::Inactive
                } else {
                    let l = real(value).map_err(err)?.abs();
                    LogitBound::Symmetric(l)
                })
            }
            "beta_sd" => self.beta_sd = real(value).map_err(err)?,
            "var_lower" => self.var_lower = real(value).map_err(err)?,
            "var_upper" => self.var_upper = real(value).map_err(err)?,
            "cauchy_scale" => self.cauchy_scale = real(value).map_err(err)?,
            "cutoffs" => {
                self.cutoffs = split_list(value)
                    .into_iter()
                    .map(real)
                    .collect::<Result<_, _>>()
                    .map_err(err)?
            }
            "direction" => {
                self.direction = match value.to_ascii_lowercase().as_str() {
                    "greater" | ">" => Direction::Greater,
                    "less" | "<" => Direction::Less,
                    "between" | "<>" => Direction::Between,
                    _ => return Err(err(format!("`{value}` is not greater, less or between"))),
                }
            }
            "reference_years" => {
                let (a, b) = parse_year_range(value).map_err(err)?;
                self.reference = Reference::Years(a, b);
            }
            "reference_window" => self.reference = Reference::LastYears(num(value).map_err(err)?),
            "levels" => {
                let v: Vec<f64> = split_list(value)
                    .into_iter()
                    .map(real)
                    .collect::<Result<_, _>>()
                    .map_err(err)?;
                if v.len() != 2 {
                    return Err(err("expected two levels, lower and upper".into()));
                }
                self.levels = Levels {
                    lower: v[0],
                    upper: v[1],
                };
            }
            "chains" => self.chains = num(value).map_err(err)?,
            "write_draws" => self.write_draws = parse_bool(value).map_err(err)?,
            "sufficient_beta" => {
                self.sufficient_beta = match value.to_ascii_lowercase().as_str() {
                    "conditional" => SufficientBetaForm::Conditional,
                    "independent" | "independent_marginals" => SufficientBetaForm::IndependentMarginals,
                    _ => return Err(err(format!("`{value}` is not conditional or independent"))),
                }
            }
            other => {
                return Err(format!(
                    "unknown key `{other}` (known keys: {})",
                    KEYS.join(", ")
                ))
            }
        }
        Ok(())
    }

    fn required<'a, T>(&self, v: &'a Option<T>, key: &str) -> AppResult<&'a T> {
        v.as_ref()
            .ok_or_else(|| AppError::Config(format!("`{key}` is required")))
    }

    pub fn region_file(&self) -> AppResult<&Path> {
        self.required(&self.region_file, "region_file").map(|p| p.as_path())
    }

    pub fn covariate_file(&self) -> AppResult<&Path> {
        self.required(&self.covariate_file, "covariate_file").map(|p| p.as_path())
    }

    pub fn output_dir(&self) -> AppResult<&Path> {
        self.required(&self.output_dir, "output_dir").map(|p| p.as_path())
    }

    pub fn event_type(&self) -> AppResult<EventType> {
        self.required(&self.event_type, "event_type").copied()
    }

    pub fn seed(&self) -> AppResult<u64> {
        self.seed
            .ok_or_else(|| AppError::Config("a seed is required (`--seed` or `seed =`)".into()))
    }

    /// Criteria for the exceedance diagnostic, one per cutoff (or per pair
    /// of cutoffs for `between`).
    pub fn criteria(&self) -> AppResult<Vec<Criterion>> {
        let c = &self.cutoffs;
        let out: Vec<Criterion> = match self.direction {
            Direction::Greater => c.iter().map(|&v| Criterion::Greater(v)).collect(),
            Direction::Less => c.iter().map(|&v| Criterion::Less(v)).collect(),
            Direction::Between => {
                if !c.len().is_multiple_of(2) {
                    return Err(AppError::Config(
                        "`between` needs cutoffs in (lower, upper) pairs".into(),
                    ));
                }
                c.chunks(2).map(|p| Criterion::Between(p[0], p[1])).collect()
            }
        };
        for cr in &out {
            cr.validate().map_err(|e| AppError::Config(e.to_string()))?;
        }
        Ok(out)
    }

    /// Prior with the given bound magnitude (from the bounds file or the
    /// default) unless `logit_bound` is set explicitly.
    pub fn prior(&self, file_limit: Option<f64>) -> AppResult<PriorConfig> {
        let logit_bound = match (self.logit_bound, file_limit) {
            (Some(b), _) => b,
            (None, Some(l)) => LogitBound::Symmetric(l),
            (None, None) => PriorConfig::default().logit_bound,
        };
        let p = PriorConfig {
            beta_sd: self.beta_sd,
            var_lower: self.var_lower,
            var_upper: self.var_upper,
            cauchy_scale: self.cauchy_scale,
            logit_bound,
        };
        p.validate().map_err(|e| AppError::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn sampler_config(&self) -> AppResult<SamplerConfig> {
        let event = self.event_type()?;
        let base = SamplerConfig::for_event(event, self.seed()?);
        let tune_iterations = match (&self.tune_iterations, self.tune_cycles) {
            (Some(v), _) => v.clone(),
            (None, None) => base.tune_iterations.clone(),
            // Shorter cycles first, as in the default 400 x 3 then 800 x 3.
            (None, Some(n)) => (0..n).map(|i| if i < n / 2 { 400 } else { 800 }).collect(),
        };
        let cfg = SamplerConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            tune_cycles: self.tune_cycles.unwrap_or(tune_iterations.len()),
            tune_iterations,
            prop_corr_alpha_delta: self.prop_corr_alpha_delta,
            prop_corr_beta_all: self.prop_corr_beta_all.unwrap_or(base.prop_corr_beta_all),
            prop_corr_beta_nat: self.prop_corr_beta_nat.unwrap_or(base.prop_corr_beta_nat),
            sufficient_beta: self.sufficient_beta,
            ..base
        };
        cfg.validate().map_err(|e| AppError::Config(e.to_string()))?;
        if self.chains == 0 {
            return Err(AppError::Config("`chains` must be at least 1".into()));
        }
        self.levels.validate().map_err(|e| AppError::Config(e.to_string()))?;
        Ok(cfg)
    }
}
