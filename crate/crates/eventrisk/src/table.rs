//! Permissive reader for the whitespace- or tab-delimited text tables used
//! by every input file.

use std::fmt::Display;
use std::path::Path;

use crate::error::{AppError, AppResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    /// 1-based line number in the source.
    pub line: usize,
    pub fields: Vec<String>,
}

/// A parsed table: lowercase header names plus data rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub source: String,
    pub header: Vec<String>,
    pub rows: Vec<Row>,
}

fn unquote(field: &str) -> String {
    let f = field.trim();
    let f = f
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .or_else(|| f.strip_prefix('\'').and_then(|s| s.strip_suffix('\'')))
        .unwrap_or(f);
    f.to_string()
}

/// Reads a file into a string, mapping failures to [`AppError::MissingInput`].
pub fn read_text(path: &Path) -> AppResult<String> {
    std::fs::read_to_string(path).map_err(|source| AppError::MissingInput {
        path: path.to_path_buf(),
        source,
    })
}

/// Display name of an input file in error messages.
pub fn source_name(path: &Path) -> String {
    path.display().to_string()
}

impl Table {
    /// Parses `text`. Blank lines and lines starting with `#` are skipped.
    /// The first remaining line is the header. Tabs delimit if the header
    /// contains one, otherwise runs of spaces do. Surrounding quotes are
    /// stripped, and a leading row-name field (one more field than the
    /// header) is dropped.
    pub fn parse(text: &str, source: &str) -> AppResult<Table> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (header_line, header_text) = lines
            .next()
            .ok_or_else(|| AppError::data(source, "file is empty (no header row)"))?;
        let tabbed = header_text.contains('\t');
        let split = |l: &str| -> Vec<String> {
            if tabbed {
                l.split('\t').map(unquote).collect()
            } else {
                l.split_whitespace().map(unquote).collect()
            }
        };
        let header: Vec<String> = split(header_text).into_iter().map(|h| h.to_lowercase()).collect();
        if header.len() == 1 && header[0].contains(',') {
            return Err(AppError::parse(
                source,
                header_line,
                None,
                "comma-separated files are not supported; use tabs or spaces",
            ));
        }
        let mut rows = Vec::new();
        for (line, l) in lines {
            let mut fields = split(l);
            if fields.len() == header.len() + 1 {
                fields.remove(0);
            }
            if fields.len() != header.len() {
                return Err(AppError::parse(
                    source,
                    line,
                    None,
                    format!("expected {} fields, found {}", header.len(), fields.len()),
                ));
            }
            rows.push(Row { line, fields });
        }
        if rows.is_empty() {
            return Err(AppError::data(source, "no data rows after the header"));
        }
        Ok(Table {
            source: source.to_string(),
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str) -> AppResult<usize> {
        self.column(name)
            .ok_or_else(|| AppError::data(&self.source, format!("missing column `{name}`")))
    }

    /// Field `col` of `row`, parsed with `parse`.
    pub fn get<T>(&self, row: &Row, col: usize, parse: impl Fn(&str) -> Result<T, String>) -> AppResult<T> {
        parse(&row.fields[col])
            .map_err(|m| AppError::parse(&self.source, row.line, Some(&self.header[col]), m))
    }
}

/// Locale-independent real parser. Comma decimals are rejected explicitly.
pub fn parse_real(s: &str) -> Result<f64, String> {
    if s.contains(',') {
        return Err(format!("`{s}` uses a comma; the decimal separator must be a point"));
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

/// Non-negative integer; integral reals such as `12.0` are accepted.
pub fn parse_count(s: &str) -> Result<u32, String> {
    if let Ok(v) = s.parse::<u32>() {
        return Ok(v);
    }
    let v = parse_real(s)?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(format!("`{s}` is not a non-negative integer"));
    }
    Ok(v as u32)
}

pub fn parse_year(s: &str) -> Result<i32, String> {
    s.parse::<i32>()
        .ok()
        .or_else(|| {
            let v = parse_real(s).ok()?;
            (v.fract() == 0.0 && v.abs() < 1e6).then_some(v as i32)
        })
        .ok_or_else(|| format!("`{s}` is not a year"))
}

/// Writes a tab-delimited table. Reals use the shortest representation
/// that parses back to the same value.
pub fn write_tsv<D: Display>(header: &[&str], rows: impl IntoIterator<Item = Vec<D>>) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delimiters_quotes_and_row_names() {
        let t = Table::parse("a b  c\n1 2 3\n\n# note\n4   5 6\n", "x").unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1].line, 5);
        let t = Table::parse("\"A\"\t\"b\"\n\"1\"\t\"hot\"\t\"x\"\n", "x").unwrap();
        assert_eq!(t.header, ["a", "b"]);
        assert_eq!(t.rows[0].fields, ["hot", "x"]);
        assert!(Table::parse("", "x").is_err());
        assert!(Table::parse("a b\n", "x").is_err());
        assert!(Table::parse("a,b\n1,2\n", "x").is_err());
        assert!(Table::parse("a b\n1 2 3 4\n", "x").is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_real("-0.25").unwrap(), -0.25);
        assert!(parse_real("0,25").unwrap_err().contains("comma"));
        assert!(parse_real("nan").is_err());
        assert_eq!(parse_count("12.0").unwrap(), 12);
        assert!(parse_count("-1").is_err());
        assert!(parse_count("1.5").is_err());
        assert_eq!(parse_year("1982").unwrap(), 1982);
    }
}
