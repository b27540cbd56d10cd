//! Synthetic region files from a generator spec (`key = value`).

use std::path::Path;

use eventrisk_core::model::center;
use eventrisk_core::oracle::{generate_panel, scaled_schedule, GeneratorSpec};
use eventrisk_core::rng::chain_rng;
use eventrisk_core::{CountPanel, CovariateSeries, EventType, LogitBound, ParamState, MONTHS};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariates::format_covariates;
use crate::error::{AppError, AppResult};
use crate::keyval::{self, parse_year_range, split_list};
use crate::region::format_region;
use crate::table::{parse_count, parse_real, read_text};

/// A parsed generator spec with every random component resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerateSpec {
    pub event_type: EventType,
    pub raw_all: Vec<f64>,
    pub raw_nat: Vec<f64>,
    pub spec: GeneratorSpec,
}

pub const KEYS: &[&str] = &[
    "seed",
    "event_type",
    "years",
    "first_year",
    "n_years",
    "ensemble_sizes",
    "beta_all",
    "beta_nat",
    "tau2",
    "sigma2",
    "omega2",
    "alpha",
    "delta",
    "gamma",
    "gmt_all_raw",
    "gmt_nat_raw",
    "logit_bound",
];

fn reals(v: &str) -> Result<Vec<f64>, String> {
    split_list(v).into_iter().map(parse_real).collect()
}

fn sized(v: Vec<f64>, n: usize, what: &str) -> Result<Vec<f64>, String> {
    if v.len() == n {
        Ok(v)
    } else {
        Err(format!("{what} needs {n} values, found {}", v.len()))
    }
}

/// Default covariates: a warming ALL series and a flat NAT series, each
/// with a small oscillation.
pub fn default_covariates(n: usize) -> (Vec<f64>, Vec<f64>) {
    let all = (0..n).map(|t| 0.015 * t as f64 + 0.05 * (0.9 * t as f64).sin()).collect();
    let nat = (0..n).map(|t| 0.05 * (0.9 * t as f64 + 1.0).sin()).collect();
    (all, nat)
}

pub fn parse_generate_spec(text: &str, source: &str) -> AppResult<GenerateSpec> {
    let mut get = std::collections::HashMap::new();
    for e in keyval::parse(text, source)? {
        if !KEYS.contains(&e.key.as_str()) {
            return Err(AppError::parse(
                source,
                e.line,
                Some(&e.key),
                format!("unknown key (known keys: {})", KEYS.join(", ")),
            ));
        }
        get.insert(e.key.clone(), e);
    }
    let fail = |key: &str, msg: String| {
        let line = get.get(key).map(|e: &keyval::Entry| e.line).unwrap_or(0);
        AppError::parse(source, line, Some(key), msg)
    };
    let value = |key: &str| get.get(key).map(|e| e.value.as_str());
    let required = |key: &str| value(key).ok_or_else(|| AppError::data(source, format!("`{key}` is required")));
    let real = |key: &str| -> AppResult<f64> { parse_real(required(key)?).map_err(|m| fail(key, m)) };

    let seed: u64 = required("seed")?
        .parse()
        .map_err(|_| fail("seed", "not a non-negative integer".into()))?;
    let event_type = match value("event_type") {
        Some(v) => EventType::parse(&v.to_ascii_lowercase()).map_err(|e| fail("event_type", e.to_string()))?,
        None => EventType::Hot,
    };
    let years: Vec<i32> = match (value("years"), value("first_year"), value("n_years")) {
        (Some(r), None, None) => {
            if r.is_empty() {
                Vec::new()
            } else {
                let (a, b) = parse_year_range(r).map_err(|m| fail("years", m))?;
                (a..=b).collect()
            }
        }
        (None, Some(f), Some(n)) => {
            let f: i32 = f.parse().map_err(|_| fail("first_year", format!("`{f}` is not a year")))?;
            let n = parse_count(n).map_err(|m| fail("n_years", m))?;
            (0..n as i32).map(|t| f + t).collect()
        }
        _ => {
            return Err(AppError::data(
                source,
                "give either `years = first-last` or both `first_year` and `n_years`",
            ))
        }
    };
    let n = years.len();
    if n == 0 {
        return Err(AppError::data(source, "the generator needs at least one year"));
    }

    let ensemble_sizes: Vec<u32> = match value("ensemble_sizes").unwrap_or("table1") {
        "table1" => scaled_schedule(n, 1),
        v if v.starts_with("table1/") => {
            let d = parse_count(&v[7..]).map_err(|m| fail("ensemble_sizes", m))?;
            if d == 0 {
                return Err(fail("ensemble_sizes", "divisor must be positive".into()));
            }
            scaled_schedule(n, d)
        }
        v => {
            let sizes = split_list(v)
                .into_iter()
                .map(parse_count)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| fail("ensemble_sizes", m))?;
            if sizes.len() != n || sizes.contains(&0) {
                return Err(fail("ensemble_sizes", format!("need {n} positive sizes")));
            }
            sizes
        }
    };

    let pair = |key: &str| -> AppResult<[f64; 2]> {
        let v = sized(reals(required(key)?).map_err(|m| fail(key, m))?, 2, key).map_err(|m| fail(key, m))?;
        Ok([v[0], v[1]])
    };
    let mut s = ParamState::zeros(n);
    s.beta_all = pair("beta_all")?;
    s.beta_nat = pair("beta_nat")?;
    s.tau2 = real("tau2")?;
    s.sigma2 = real("sigma2")?;
    s.omega2 = real("omega2")?;
    for (key, v) in [("tau2", s.tau2), ("sigma2", s.sigma2), ("omega2", s.omega2)] {
        if v.is_nan() || v <= 0.0 {
            return Err(fail(key, format!("variance {v} must be positive")));
        }
    }

    // Unspecified effects are drawn from their population distributions on
    // stream 1; the counts use stream 0.
    let mut rng = chain_rng(seed, 1);
    let mut draw = |len: usize, var: f64| -> Vec<f64> {
        (0..len).map(|_| var.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let mut listed = |key: &str, len: usize, var: f64| -> AppResult<Vec<f64>> {
        match value(key) {
            Some(v) => sized(reals(v).map_err(|m| fail(key, m))?, len, key).map_err(|m| fail(key, m)),
            None => Ok(draw(len, var)),
        }
    };
    s.alpha = listed("alpha", n, s.tau2)?;
    s.delta = listed("delta", n, s.sigma2)?;
    let mut gamma = listed("gamma", MONTHS, s.omega2)?;
    center(&mut gamma);
    s.gamma.copy_from_slice(&gamma);

    let (raw_all, raw_nat) = match (value("gmt_all_raw"), value("gmt_nat_raw")) {
        (None, None) => default_covariates(n),
        (Some(a), Some(b)) => (
            sized(reals(a).map_err(|m| fail("gmt_all_raw", m))?, n, "gmt_all_raw").map_err(|m| fail("gmt_all_raw", m))?,
            sized(reals(b).map_err(|m| fail("gmt_nat_raw", m))?, n, "gmt_nat_raw").map_err(|m| fail("gmt_nat_raw", m))?,
        ),
        _ => return Err(AppError::data(source, "give both `gmt_all_raw` and `gmt_nat_raw` or neither")),
    };
    let covariates =
        CovariateSeries::standardize(&raw_all, &raw_nat).map_err(|e| AppError::data(source, e.to_string()))?;

    let bound = match value("logit_bound") {
        None => LogitBound::Symmetric(15.0),
        Some(v) if v.eq_ignore_ascii_case("inactive") => LogitBound::Inactive,
        Some(v) => LogitBound::Symmetric(parse_real(v).map_err(|m| fail("logit_bound", m))?.abs()),
    };
    let (lo, hi) = s.logit_range(&covariates);
    if !bound.admits(lo, hi) {
        return Err(AppError::data(
            source,
            format!("the true state has monthly logits in [{lo}, {hi}], outside the logit bound"),
        ));
    }

    Ok(GenerateSpec {
        event_type,
        raw_all,
        raw_nat,
        spec: GeneratorSpec {
            years,
            ensemble_sizes,
            true_state: s,
            covariates,
            seed,
        },
    })
}

pub fn load_generate_spec(path: &Path) -> AppResult<GenerateSpec> {
    parse_generate_spec(&read_text(path)?, &path.display().to_string())
}

/// Simulated panel plus its rendered region and covariate files.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub spec: GenerateSpec,
    pub panel: CountPanel,
    pub region_text: String,
    pub covariate_text: String,
}

pub fn generate(spec: GenerateSpec) -> AppResult<Generated> {
    let panel = generate_panel(&spec.spec).map_err(|e| AppError::data("generator spec", e.to_string()))?;
    let region_text = format_region(&panel, spec.event_type);
    let covariate_text = format_covariates(&spec.spec.years, &spec.raw_all, &spec.raw_nat)
        .map_err(|e| AppError::data("generator spec", e.to_string()))?;
    Ok(Generated {
        spec,
        panel,
        region_text,
        covariate_text,
    })
}

fn write(path: &Path, contents: &str) -> AppResult<()> {
    std::fs::write(path, contents).map_err(|source| AppError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a spec, simulates, and writes the region file plus the optional
/// covariate file and true state (JSON).
pub fn cmd_generate(
    spec_path: &Path,
    out: &Path,
    covariates_out: Option<&Path>,
    truth_out: Option<&Path>,
) -> AppResult<Generated> {
    let g = generate(load_generate_spec(spec_path)?)?;
    write(out, &g.region_text)?;
    if let Some(p) = covariates_out {
        write(p, &g.covariate_text)?;
    }
    if let Some(p) = truth_out {
        let mut json = serde_json::to_string_pretty(&g.spec.spec.true_state).expect("state serializes");
        json.push('\n');
        write(p, &json)?;
    }
    Ok(g)
}
