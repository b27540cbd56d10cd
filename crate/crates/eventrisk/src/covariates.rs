//! Covariate files: `gmtA_raw gmtA gmtN_raw gmtN`, one row per year, with an
//! optional `year` column.

use std::path::Path;

use eventrisk_core::{CovariateSeries, Scenario};

use crate::error::{AppError, AppResult};
use crate::table::{self, parse_real, parse_year, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct CovariateTable {
    pub source: String,
    pub years: Option<Vec<i32>>,
    pub all_raw: Option<Vec<f64>>,
    pub all: Option<Vec<f64>>,
    pub nat_raw: Option<Vec<f64>>,
    pub nat: Option<Vec<f64>>,
}

pub fn parse_covariates(text: &str, source: &str) -> AppResult<CovariateTable> {
    let t = Table::parse(text, source)?;
    let real_column = |name: &str| -> AppResult<Option<Vec<f64>>> {
        match t.column(name) {
            None => Ok(None),
            Some(c) => t.rows.iter().map(|r| t.get(r, c, parse_real)).collect::<AppResult<_>>().map(Some),
        }
    };
    let years = match t.column("year") {
        None => None,
        Some(c) => Some(t.rows.iter().map(|r| t.get(r, c, parse_year)).collect::<AppResult<Vec<_>>>()?),
    };
    let table = CovariateTable {
        source: source.to_string(),
        years,
        all_raw: real_column("gmta_raw")?,
        all: real_column("gmta")?,
        nat_raw: real_column("gmtn_raw")?,
        nat: real_column("gmtn")?,
    };
    let scaled = table.all.is_some() && table.nat.is_some();
    let raw = table.all_raw.is_some() && table.nat_raw.is_some();
    if !scaled && !raw {
        return Err(AppError::data(
            source,
            "need columns `gmtA` and `gmtN`, or `gmtA_raw` and `gmtN_raw`",
        ));
    }
    if let Some(y) = &table.years {
        if let Some(w) = y.windows(2).find(|w| w[1] != w[0] + 1) {
            return Err(AppError::data(
                source,
                format!("years must be consecutive: {} is followed by {}", w[0], w[1]),
            ));
        }
    }
    Ok(table)
}

pub fn load_covariates(path: &Path) -> AppResult<CovariateTable> {
    parse_covariates(&table::read_text(path)?, &table::source_name(path))
}

impl CovariateTable {
    pub fn len(&self) -> usize {
        [&self.all, &self.all_raw].into_iter().flatten().map(Vec::len).next().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Model covariates for a panel covering `years`. The scaled columns
    /// are used when present and must already be standardized; otherwise
    /// the raw columns are standardized here.
    pub fn series_for(&self, years: &[i32]) -> AppResult<CovariateSeries> {
        if self.len() != years.len() {
            return Err(AppError::Mismatch(format!(
                "{} has {} years of covariates, the count panel has {}",
                self.source,
                self.len(),
                years.len()
            )));
        }
        if let Some(y) = &self.years {
            if y.as_slice() != years {
                return Err(AppError::Mismatch(format!(
                    "{} covers {}-{}, the count panel covers {}-{}",
                    self.source,
                    y[0],
                    y[y.len() - 1],
                    years[0],
                    years[years.len() - 1]
                )));
            }
        }
        let result = match (&self.all, &self.nat) {
            (Some(a), Some(n)) => CovariateSeries::from_standardized(a.clone(), n.clone()),
            _ => CovariateSeries::standardize(
                self.all_raw.as_deref().unwrap_or_default(),
                self.nat_raw.as_deref().unwrap_or_default(),
            ),
        };
        result.map_err(|e| AppError::data(&self.source, e.to_string()))
    }
}

/// Tab-delimited covariate file with a year column, raw values and their
/// standardized versions.
pub fn format_covariates(years: &[i32], raw_all: &[f64], raw_nat: &[f64]) -> Result<String, eventrisk_core::Error> {
    let s = CovariateSeries::standardize(raw_all, raw_nat)?;
    let rows = years.iter().enumerate().map(|(t, y)| {
        vec![
            y.to_string(),
            raw_all[t].to_string(),
            s.x(Scenario::All, t).to_string(),
            raw_nat[t].to_string(),
            s.x(Scenario::Nat, t).to_string(),
        ]
    });
    Ok(table::write_tsv(&["year", "gmtA_raw", "gmtA", "gmtN_raw", "gmtN"], rows))
}
