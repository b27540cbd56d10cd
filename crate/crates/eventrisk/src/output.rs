//! Result files of a fit: `yearly.tsv`, `series_long.tsv`, `summary.json`
//! and optionally `draws.tsv`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eventrisk_core::analysis::{Levels, Quantity, RiskSeries, Summary};
use eventrisk_core::{PriorConfig, SamplerConfig, MONTHS};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::fit::FitResults;
use crate::table::{self, parse_real, parse_year, Table};

pub const FORMAT_VERSION: u32 = 1;
pub const YEARLY_FILE: &str = "yearly.tsv";
pub const SERIES_FILE: &str = "series_long.tsv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DRAWS_FILE: &str = "draws.tsv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiRecord {
    pub direction: String,
    pub cutoffs: Vec<f64>,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
    pub category: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block: String,
    pub acceptance: f64,
    pub proposal_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub chain: u64,
    pub retained: usize,
    pub blocks: Vec<BlockRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub first_year: i32,
    pub last_year: i32,
    pub x_star_all: f64,
    pub x_star_nat: f64,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub format_version: u32,
    pub region: String,
    pub event_type: String,
    pub seed: u64,
    pub chains: u64,
    pub retained_per_chain: usize,
    pub retained_total: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub n_years: usize,
    pub levels: Levels,
    pub sigma: Summary,
    pub sigma2: Summary,
    pub reference: ReferenceRecord,
    pub pi: Vec<PiRecord>,
    pub sampler: SamplerConfig,
    pub prior: PriorConfig,
    /// The main run starts from the last tuning state.
    pub warm_start: bool,
    /// Input files as given in the manifest or flags.
    pub inputs: BTreeMap<String, String>,
    pub diagnostics: Vec<ChainRecord>,
}

fn yearly_header() -> Vec<String> {
    let mut h = vec!["year".to_string()];
    for q in Quantity::EVERY {
        for s in ["median", "lower", "upper"] {
            h.push(format!("{}_{s}", q.label()));
        }
    }
    h
}

pub fn summary_record(r: &FitResults) -> SummaryRecord {
    let p = &r.prepared;
    let years = p.panel.years();
    SummaryRecord {
        format_version: FORMAT_VERSION,
        region: p.region.clone(),
        event_type: p.event_type.label().to_string(),
        seed: r.config.seed,
        chains: r.chains,
        retained_per_chain: r.config.retained_count(),
        retained_total: r.draws.len(),
        first_year: years[0],
        last_year: years[years.len() - 1],
        n_years: years.len(),
        levels: r.levels,
        sigma: r.sigma,
        sigma2: r.sigma2,
        reference: ReferenceRecord {
            first_year: p.reference_years.0,
            last_year: p.reference_years.1,
            x_star_all: p.x_star.0,
            x_star_nat: p.x_star.1,
        },
        pi: r
            .pi
            .iter()
            .map(|e| PiRecord {
                direction: e.criterion.direction().to_string(),
                cutoffs: e.criterion.cutoffs(),
                lower: e.lower,
                median: e.median,
                upper: e.upper,
                category: e.category.code(),
            })
            .collect(),
        sampler: r.config.clone(),
        prior: p.prior,
        warm_start: true,
        inputs: p
            .input_files
            .iter()
            .map(|(k, v)| (k.clone(), v.display().to_string()))
            .collect(),
        diagnostics: r
            .draws
            .chains
            .iter()
            .map(|c| ChainRecord {
                chain: c.chain,
                retained: c.retained,
                blocks: c
                    .acceptance_rates
                    .iter()
                    .zip(&c.proposal_sds)
                    .map(|(a, s)| BlockRecord {
                        block: a.block.label(),
                        acceptance: a.value,
                        proposal_sd: s.value,
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn format_yearly(series: &[RiskSeries]) -> String {
    let header = yearly_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let years = &series[0].years;
    let rows = years.iter().enumerate().map(|(t, y)| {
        let mut row = vec![y.to_string()];
        for s in series {
            row.extend([s.median[t], s.lower[t], s.upper[t]].map(|v| v.to_string()));
        }
        row
    });
    table::write_tsv(&header, rows)
}

/// Long format for plotting: one row per (quantity, year).
pub fn format_series_long(series: &[RiskSeries]) -> String {
    let rows = series.iter().flat_map(|s| {
        s.years.iter().enumerate().map(move |(t, y)| {
            vec![
                s.quantity.label().to_string(),
                y.to_string(),
                s.median[t].to_string(),
                s.lower[t].to_string(),
                s.upper[t].to_string(),
            ]
        })
    });
    table::write_tsv(&["quantity", "year", "median", "lower", "upper"], rows)
}

/// One retained state per row, chains in order.
pub fn format_draws(r: &FitResults) -> String {
    let years = r.prepared.panel.years();
    let mut header: Vec<String> = [
        "chain", "draw", "beta_all_0", "beta_all_1", "beta_nat_0", "beta_nat_1", "tau2", "sigma2", "omega2",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=MONTHS).map(|j| format!("gamma_{j}")));
    header.extend(years.iter().map(|y| format!("alpha_{y}")));
    header.extend(years.iter().map(|y| format!("delta_{y}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut chain_of = Vec::with_capacity(r.draws.len());
    for c in &r.draws.chains {
        chain_of.extend((0..c.retained).map(|i| (c.chain, i)));
    }
    let rows = r.draws.states.iter().zip(chain_of).map(|(s, (c, i))| {
        let mut row = vec![c.to_string(), i.to_string()];
        let reals = s
            .beta_all
            .iter()
            .chain(&s.beta_nat)
            .chain([&s.tau2, &s.sigma2, &s.omega2])
            .chain(&s.gamma)
            .chain(&s.alpha)
            .chain(&s.delta);
        row.extend(reals.map(|v| v.to_string()));
        row
    });
    table::write_tsv(&header, rows)
}

fn write(dir: &Path, name: &str, contents: &str) -> AppResult<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| AppError::Output {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Renders every output in memory, then writes the files into `dir`
/// (created if needed). Returns the written paths.
pub fn write_results(r: &FitResults, dir: &Path) -> AppResult<Vec<PathBuf>> {
    let mut files = vec![
        (YEARLY_FILE, format_yearly(&r.series)),
        (SERIES_FILE, format_series_long(&r.series)),
    ];
    let mut json = serde_json::to_string_pretty(&summary_record(r)).expect("summary serializes");
    json.push('\n');
    files.push((SUMMARY_FILE, json));
    if r.write_draws {
        files.push((DRAWS_FILE, format_draws(r)));
    }
    std::fs::create_dir_all(dir).map_err(|source| AppError::Output {
        path: dir.to_path_buf(),
        source,
    })?;
    files.iter().map(|(name, body)| write(dir, name, body)).collect()
}

/// Reads `yearly.tsv` back into one series per quantity.
pub fn read_yearly(path: &Path) -> AppResult<Vec<RiskSeries>> {
    let source = table::source_name(path);
    let t = Table::parse(&table::read_text(path)?, &source)?;
    let c_year = t.require("year")?;
    let years = t.rows.iter().map(|r| t.get(r, c_year, parse_year)).collect::<AppResult<Vec<_>>>()?;
    let column = |name: &str| -> AppResult<Vec<f64>> {
        let c = t.require(name)?;
        t.rows.iter().map(|r| t.get(r, c, parse_real)).collect()
    };
    Quantity::EVERY
        .iter()
        .map(|&q| {
            Ok(RiskSeries {
                quantity: q,
                years: years.clone(),
                median: column(&format!("{}_median", q.label()))?,
                lower: column(&format!("{}_lower", q.label()))?,
                upper: column(&format!("{}_upper", q.label()))?,
            })
        })
        .collect()
}

pub fn read_summary(path: &Path) -> AppResult<SummaryRecord> {
    let text = table::read_text(path)?;
    serde_json::from_str(&text).map_err(|e| AppError::data(&table::source_name(path), e.to_string()))
}
