//! Per-region lower logit bounds: `region hot_limits cold_limits wet_limits`.

use std::path::Path;

use eventrisk_core::EventType;

use crate::error::{AppError, AppResult};
use crate::table::{self, parse_real, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsRow {
    pub region: String,
    /// Lower bounds (`-L`) for hot, cold and wet events.
    pub limits: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsTable {
    pub source: String,
    pub rows: Vec<BoundsRow>,
}

fn event_index(e: EventType) -> usize {
    match e {
        EventType::Hot => 0,
        EventType::Cold => 1,
        EventType::Wet => 2,
    }
}

pub fn parse_bounds(text: &str, source: &str) -> AppResult<BoundsTable> {
    let t = Table::parse(text, source)?;
    let c_region = t.require("region")?;
    let cols = ["hot_limits", "cold_limits", "wet_limits"]
        .map(|c| t.require(c))
        .into_iter()
        .collect::<AppResult<Vec<_>>>()?;
    let mut rows: Vec<BoundsRow> = Vec::new();
    for r in &t.rows {
        let region = r.fields[c_region].clone();
        if rows.iter().any(|b| b.region == region) {
            return Err(AppError::parse(source, r.line, Some("region"), format!("duplicate region `{region}`")));
        }
        let mut limits = [0.0; 3];
        for (i, &c) in cols.iter().enumerate() {
            limits[i] = t.get(r, c, parse_real)?;
            if limits[i].is_nan() || limits[i] >= 0.0 {
                return Err(AppError::parse(
                    source,
                    r.line,
                    Some(&t.header[c]),
                    format!("lower logit bound {} must be negative", limits[i]),
                ));
            }
        }
        rows.push(BoundsRow { region, limits });
    }
    Ok(BoundsTable {
        source: source.to_string(),
        rows,
    })
}

pub fn load_bounds(path: &Path) -> AppResult<BoundsTable> {
    parse_bounds(&table::read_text(path)?, &table::source_name(path))
}

impl BoundsTable {
    /// The bound magnitude `L` for a region and event type.
    pub fn limit(&self, region: &str, event: EventType) -> AppResult<f64> {
        self.rows
            .iter()
            .find(|r| r.region == region)
            .map(|r| -r.limits[event_index(event)])
            .ok_or_else(|| AppError::Mismatch(format!("region `{region}` is not listed in {}", self.source)))
    }
}
