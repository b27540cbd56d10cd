//! Region count files: one row per (event type, scenario, year) with twelve
//! monthly counts and the ensemble size.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use eventrisk_core::{CountPanel, EventType, Scenario, MONTHS};

use crate::error::{AppError, AppResult};
use crate::table::{self, parse_count, parse_year, Table};

pub const MONTH_NAMES: [&str; MONTHS] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

/// Where a panel came from.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMeta {
    /// File stem, e.g. `USA-C` for `USA-C.txt`.
    pub region: String,
    pub event_type: EventType,
    /// Data rows in the file, all event types.
    pub rows_in_file: usize,
}

struct RegionRow {
    line: usize,
    scenario: Scenario,
    year: i32,
    n_sims: u32,
    counts: [u32; MONTHS],
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    match s.to_ascii_uppercase().as_str() {
        "ALL" => Ok(Scenario::All),
        "NAT" => Ok(Scenario::Nat),
        _ => Err(format!("unknown scenario `{s}` (expected ALL or NAT)")),
    }
}

fn parse_event(s: &str) -> Result<EventType, String> {
    EventType::parse(&s.to_ascii_lowercase()).map_err(|_| format!("unknown event type `{s}` (expected hot, cold or wet)"))
}

/// Parses region-file text and extracts the panel of one event type.
pub fn parse_region(text: &str, source: &str, event: EventType) -> AppResult<CountPanel> {
    parse_counted(text, source, event).map(|(p, _)| p)
}

fn parse_counted(text: &str, source: &str, event: EventType) -> AppResult<(CountPanel, usize)> {
    let t = Table::parse(text, source)?;
    let month_cols = MONTH_NAMES
        .iter()
        .map(|m| t.require(m))
        .collect::<AppResult<Vec<_>>>()?;
    let c_event = t.require("event_type")?;
    let c_scen = t.require("scenario")?;
    let c_year = t.require("year")?;
    let c_n = t.require("n_sims")?;

    let mut seen: HashMap<(EventType, Scenario, i32), usize> = HashMap::new();
    let mut selected = Vec::new();
    for row in &t.rows {
        let ev = t.get(row, c_event, parse_event)?;
        let scenario = t.get(row, c_scen, parse_scenario)?;
        let year = t.get(row, c_year, parse_year)?;
        let n_sims = t.get(row, c_n, parse_count)?;
        if n_sims == 0 {
            return Err(AppError::parse(source, row.line, Some("n_sims"), "ensemble size must be at least 1"));
        }
        let mut counts = [0u32; MONTHS];
        for (j, &c) in month_cols.iter().enumerate() {
            counts[j] = t.get(row, c, parse_count)?;
            if counts[j] > n_sims {
                return Err(AppError::parse(
                    source,
                    row.line,
                    Some(MONTH_NAMES[j]),
                    format!("count {} exceeds n_sims {n_sims}", counts[j]),
                ));
            }
        }
        if let Some(first) = seen.insert((ev, scenario, year), row.line) {
            return Err(AppError::parse(
                source,
                row.line,
                None,
                format!(
                    "duplicate row for {} {} {year} (first seen on line {first})",
                    ev.label(),
                    scenario.label()
                ),
            ));
        }
        if ev == event {
            selected.push(RegionRow {
                line: row.line,
                scenario,
                year,
                n_sims,
                counts,
            });
        }
    }
    if selected.is_empty() {
        return Err(AppError::data(source, format!("no rows for event type `{}`", event.label())));
    }

    let mut by_year: BTreeMap<i32, [Option<RegionRow>; 2]> = BTreeMap::new();
    for r in selected {
        let slot = by_year.entry(r.year).or_default();
        let i = (r.scenario == Scenario::Nat) as usize;
        slot[i] = Some(r);
    }
    let mut years = Vec::new();
    let mut all = Vec::new();
    let mut nat = Vec::new();
    let mut sizes = Vec::new();
    let mut prev: Option<i32> = None;
    for (year, [a, n]) in by_year {
        if let Some(p) = prev {
            if year != p + 1 {
                return Err(AppError::data(
                    source,
                    format!("years must be consecutive: {} is followed by {year}", p),
                ));
            }
        }
        prev = Some(year);
        let (a, n) = match (a, n) {
            (Some(a), Some(n)) => (a, n),
            (None, _) => return Err(AppError::data(source, format!("year {year} has no ALL row"))),
            (_, None) => return Err(AppError::data(source, format!("year {year} has no NAT row"))),
        };
        if a.n_sims != n.n_sims {
            return Err(AppError::parse(
                source,
                n.line,
                Some("n_sims"),
                format!(
                    "NAT ensemble size {} differs from ALL size {} on line {}",
                    n.n_sims, a.n_sims, a.line
                ),
            ));
        }
        years.push(year);
        sizes.push(a.n_sims);
        all.push(a.counts);
        nat.push(n.counts);
    }
    let panel = CountPanel::new(years, all, nat, sizes).map_err(|e| AppError::data(source, e.to_string()))?;
    Ok((panel, t.rows.len()))
}

pub fn region_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "region".into())
}

/// Reads `path` and extracts the panel of `event`.
pub fn load_region(path: &Path, event: EventType) -> AppResult<(CountPanel, RegionMeta)> {
    let text = table::read_text(path)?;
    let source = table::source_name(path);
    let (panel, rows_in_file) = parse_counted(&text, &source, event)?;
    Ok((
        panel,
        RegionMeta {
            region: region_name(path),
            event_type: event,
            rows_in_file,
        },
    ))
}

/// Tab-delimited region file holding one event type: ALL rows for every
/// year, then NAT rows.
pub fn format_region(panel: &CountPanel, event: EventType) -> String {
    let mut header: Vec<&str> = MONTH_NAMES.to_vec();
    header.extend(["event_type", "scenario", "year", "n_sims"]);
    let mut rows = Vec::new();
    for k in Scenario::BOTH {
        for (t, &year) in panel.years().iter().enumerate() {
            let mut row: Vec<String> = panel.counts(k)[t].iter().map(|c| c.to_string()).collect();
            row.push(event.label().into());
            row.push(k.label().into());
            row.push(year.to_string());
            row.push(panel.ensemble_size(t).to_string());
            rows.push(row);
        }
    }
    table::write_tsv(&header, rows)
}
