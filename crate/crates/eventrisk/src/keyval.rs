//! `key = value` documents (run manifests and generator specs).

use std::collections::HashSet;

use crate::error::{AppError, AppResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// One `key = value` per line; blank lines and `#` comment lines are
/// skipped. Keys are case-insensitive and may appear once.
pub fn parse(text: &str, source: &str) -> AppResult<Vec<Entry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| AppError::parse(source, i + 1, None, format!("expected `key = value`, found `{line}`")))?;
        let key = k.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(AppError::parse(source, i + 1, None, "empty key"));
        }
        if !seen.insert(key.clone()) {
            return Err(AppError::parse(source, i + 1, Some(&key), "key given twice"));
        }
        out.push(Entry {
            line: i + 1,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

/// Comma- or whitespace-separated list.
pub fn split_list(value: &str) -> Vec<&str> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

/// `first-last` inclusive year range.
pub fn parse_year_range(value: &str) -> Result<(i32, i32), String> {
    let (a, b) = value
        .split_once('-')
        .ok_or_else(|| format!("`{value}` is not a year range like 2009-2013"))?;
    let a: i32 = a.trim().parse().map_err(|_| format!("`{a}` is not a year"))?;
    let b: i32 = b.trim().parse().map_err(|_| format!("`{b}` is not a year"))?;
    if b < a {
        return Err(format!("year range {a}-{b} is reversed"));
    }
    Ok((a, b))
}

pub fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{value}` is not true or false")),
    }
}
