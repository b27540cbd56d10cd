//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use eventrisk_core::single_year::{phi_ci, phi_ci_sigma_range, robustness_verdict, StudyInput};
use eventrisk_core::thresholds::threshold_percentiles;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::fit::{prepare, run_fit, FitResults};
use crate::generate::cmd_generate;
use crate::manifest::Manifest;
use crate::output::write_results;

#[derive(Debug, Parser)]
#[command(name = "eventrisk", version, about = "Time-varying event probabilities and risk ratios from ensemble counts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tune and run the sampler, then write per-year and summary results.
    Fit(RunArgs),
    /// Interval for a percentile of the yearly log risk ratio from one study.
    #[command(allow_negative_numbers = true)]
    PhiCi(PhiCiArgs),
    /// Monthly percentile pair for a one-in-N-years event.
    Threshold(ThresholdArgs),
    /// Simulate a region file from a generator spec.
    Generate(GenerateArgs),
    /// Load and cross-check the inputs of a run without sampling.
    Validate(RunArgs),
}

/// Run settings. Flags override the manifest; `--set` reaches every
/// manifest key.
#[derive(Debug, Args, Default)]
#[command(allow_negative_numbers = true)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub region_file: Option<String>,
    #[arg(long)]
    pub covariate_file: Option<String>,
    #[arg(long)]
    pub bounds_file: Option<String>,
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long)]
    pub event_type: Option<String>,
    #[arg(long)]
    pub output_dir: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub iterations: Option<String>,
    #[arg(long)]
    pub burn_in: Option<String>,
    #[arg(long)]
    pub thin: Option<String>,
    #[arg(long)]
    pub tune_cycles: Option<String>,
    #[arg(long)]
    pub tune_iterations: Option<String>,
    #[arg(long)]
    pub logit_bound: Option<String>,
    #[arg(long)]
    pub cutoffs: Option<String>,
    #[arg(long)]
    pub direction: Option<String>,
    #[arg(long)]
    pub reference_years: Option<String>,
    #[arg(long)]
    pub chains: Option<String>,
    #[arg(long)]
    pub write_draws: bool,
    /// Any manifest key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Do not print the result summary.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct PhiCiArgs {
    /// Log risk ratio estimate of the single-year study.
    #[arg(long)]
    pub xi_hat: f64,
    /// Its sampling variance, already divided by the ensemble size.
    #[arg(long)]
    pub sampling_var: f64,
    /// Interannual variance of the yearly log risk ratio.
    #[arg(long)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.05)]
    pub percentile: f64,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Heuristic: widen over a sigma2 range LO,HI (endpoint substitution).
    #[arg(long, value_name = "LO,HI")]
    pub sigma2_range: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long, default_value_t = 10.0)]
    pub block_years: f64,
    #[arg(long, default_value_t = 12.0)]
    pub periods_per_year: f64,
    /// Round to this many decimals.
    #[arg(long)]
    pub digits: Option<u32>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Region file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub covariates_out: Option<PathBuf>,
    /// Write the true parameter state as JSON.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

impl RunArgs {
    /// Manifest file (if any) with flag overrides applied. Flag paths are
    /// relative to the working directory.
    pub fn manifest(&self) -> AppResult<Manifest> {
        let mut m = match &self.manifest {
            Some(p) => Manifest::from_file(p)?,
            None => Manifest::default(),
        };
        let flags = [
            ("region_file", &self.region_file),
            ("covariate_file", &self.covariate_file),
            ("bounds_file", &self.bounds_file),
            ("region", &self.region),
            ("event_type", &self.event_type),
            ("output_dir", &self.output_dir),
            ("seed", &self.seed),
            ("iterations", &self.iterations),
            ("burn_in", &self.burn_in),
            ("thin", &self.thin),
            ("tune_cycles", &self.tune_cycles),
            ("tune_iterations", &self.tune_iterations),
            ("logit_bound", &self.logit_bound),
            ("cutoffs", &self.cutoffs),
            ("direction", &self.direction),
            ("reference_years", &self.reference_years),
            ("chains", &self.chains),
        ];
        let here = Path::new("");
        for (key, v) in flags {
            if let Some(v) = v {
                m.set(key, v, here)
                    .map_err(|e| AppError::Config(format!("--{}: {e}", key.replace('_', "-"))))?;
            }
        }
        if self.write_draws {
            m.write_draws = true;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| AppError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            m.set(k.trim(), v.trim(), here)
                .map_err(|e| AppError::Config(format!("--set: {e}")))?;
        }
        Ok(m)
    }
}

fn category_label(code: u8) -> &'static str {
    match code {
        1 => "varies",
        2 => "inconclusive",
        _ => "stable",
    }
}

/// Fits and writes results. Nothing is written unless the whole fit
/// succeeds.
pub fn cmd_fit(m: &Manifest) -> AppResult<(FitResults, Vec<PathBuf>)> {
    let dir = m.output_dir()?.to_path_buf();
    let r = run_fit(m)?;
    let files = write_results(&r, &dir)?;
    Ok((r, files))
}

fn print_fit(out: &mut impl Write, r: &FitResults, files: &[PathBuf]) -> std::io::Result<()> {
    let p = &r.prepared;
    let years = p.panel.years();
    writeln!(
        out,
        "{} {}: {} years ({}-{}), {} draws from {} chain(s)",
        p.region,
        p.event_type.label(),
        years.len(),
        years[0],
        years[years.len() - 1],
        r.draws.len(),
        r.chains
    )?;
    writeln!(
        out,
        "sigma  median {:.4}  interval [{:.4}, {:.4}]",
        r.sigma.median, r.sigma.lower, r.sigma.upper
    )?;
    for e in &r.pi {
        let cut: Vec<String> = e.criterion.cutoffs().iter().map(|c| c.to_string()).collect();
        writeln!(
            out,
            "pi {} {:<6} median {:.3}  interval [{:.3}, {:.3}]  category {} ({})",
            e.criterion.direction(),
            cut.join(","),
            e.median,
            e.lower,
            e.upper,
            e.category.code(),
            category_label(e.category.code())
        )?;
    }
    for f in files {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(())
}

/// Record printed by `phi-ci --json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiCiRecord {
    pub input: StudyInput,
    pub lower: f64,
    pub upper: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    pub lower_multiplier: f64,
    pub upper_multiplier: f64,
    pub verdict: String,
    /// Present when the interval was widened over a sigma2 range.
    pub heuristic_sigma2_range: Option<(f64, f64)>,
}

pub fn cmd_phi_ci(input: StudyInput, sigma2_range: Option<(f64, f64)>) -> AppResult<PhiCiRecord> {
    let num = |e: eventrisk_core::Error| AppError::Numeric(e.to_string());
    let ci = match sigma2_range {
        None => phi_ci(&input).map_err(num)?,
        Some((lo, hi)) => {
            input.validate().map_err(num)?;
            phi_ci_sigma_range(&input, lo, hi).map_err(num)?
        }
    };
    let (ratio_lower, ratio_upper) = ci.ratio_bounds();
    Ok(PhiCiRecord {
        input,
        lower: ci.lower,
        upper: ci.upper,
        ratio_lower,
        ratio_upper,
        lower_multiplier: ci.lower_multiplier,
        upper_multiplier: ci.upper_multiplier,
        verdict: robustness_verdict(&input).map_err(num)?.label().to_string(),
        heuristic_sigma2_range: sigma2_range,
    })
}

pub fn cmd_threshold(block_years: f64, periods_per_year: f64) -> AppResult<(f64, f64)> {
    threshold_percentiles(block_years, periods_per_year).map_err(|e| AppError::Numeric(e.to_string()))
}

fn parse_range(s: &str) -> AppResult<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| AppError::Numeric(format!("`{s}` is not LO,HI")))?;
    let p = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| AppError::Numeric(format!("`{v}` is not a number")))
    };
    Ok((p(a)?, p(b)?))
}

fn execute(cli: Cli, out: &mut impl Write) -> AppResult<()> {
    let io = |e: std::io::Error| AppError::Output {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    match cli.command {
        Command::Fit(args) => {
            let m = args.manifest()?;
            let (r, files) = cmd_fit(&m)?;
            if !args.quiet {
                print_fit(out, &r, &files).map_err(io)?;
            }
        }
        Command::Validate(args) => {
            let m = args.manifest()?;
            let p = prepare(&m)?;
            if m.seed.is_some() {
                m.sampler_config()?;
            }
            let years = p.panel.years();
            let sizes = p.panel.ensemble_sizes();
            writeln!(
                out,
                "ok: {} {}, {} years ({}-{}), ensemble sizes {}-{}, logit bound {}",
                p.region,
                p.event_type.label(),
                years.len(),
                years[0],
                years[years.len() - 1],
                sizes.iter().min().unwrap(),
                sizes.iter().max().unwrap(),
                p.prior
                    .logit_bound
                    .limit()
                    .map_or("inactive".to_string(), |l| format!("+/-{l}"))
            )
            .map_err(io)?;
        }
        Command::PhiCi(a) => {
            let input = StudyInput {
                xi_hat: a.xi_hat,
                sampling_var: a.sampling_var,
                sigma2: a.sigma2,
                percentile: a.percentile,
                confidence: a.confidence,
            };
            let range = a.sigma2_range.as_deref().map(parse_range).transpose()?;
            let r = cmd_phi_ci(input, range)?;
            if a.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&r).expect("record serializes")).map_err(io)?;
            } else {
                writeln!(out, "log scale    [{}, {}]", r.lower, r.upper).map_err(io)?;
                writeln!(out, "ratio scale  [{}, {}]", r.ratio_lower, r.ratio_upper).map_err(io)?;
                writeln!(out, "multipliers  {} {}", r.lower_multiplier, r.upper_multiplier).map_err(io)?;
                if range.is_some() {
                    writeln!(out, "note         widened over the sigma2 range (heuristic)").map_err(io)?;
                }
                writeln!(out, "verdict      {}", r.verdict).map_err(io)?;
            }
        }
        Command::Threshold(a) => {
            let (upper, lower) = cmd_threshold(a.block_years, a.periods_per_year)?;
            let show = |v: f64| match a.digits {
                Some(d) => format!("{v:.*}", d as usize),
                None => v.to_string(),
            };
            writeln!(out, "upper_percentile\t{}", show(upper)).map_err(io)?;
            writeln!(out, "lower_percentile\t{}", show(lower)).map_err(io)?;
        }
        Command::Generate(a) => {
            let g = cmd_generate(&a.spec, &a.out, a.covariates_out.as_deref(), a.truth_out.as_deref())?;
            writeln!(
                out,
                "wrote {} ({} years, seed {})",
                a.out.display(),
                g.panel.n_years(),
                g.spec.spec.seed
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code. Errors go to stderr.
pub fn run<I, T>(args: I, out: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
