//! Confidence intervals for population percentiles of the log risk ratio
//! from a single-year study.
//!
//! A study reports `xi_hat ~ N(xi_t, s_n^2)` for one year, and the yearly
//! log risk ratios vary as `xi_t ~ N(mu, sigma2)`. Marginally
//! `xi_hat ~ N(mu, s_n^2 + sigma2)`. Its `p`-th percentile
//! `phi_p = mu + c_p sqrt(s_n^2 + sigma2)` is linear in `mu`, which gives
//! the interval `xi_hat + (c_p -/+ z) sqrt(s_n^2 + sigma2)`.

use alloc::format;

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyInput {
    /// Point estimate of the log risk ratio.
    pub xi_hat: f64,
    /// Sampling variance of `xi_hat`, already divided by the ensemble size.
    pub sampling_var: f64,
    /// Interannual variance of the yearly log risk ratio.
    pub sigma2: f64,
    pub percentile: f64,
    pub confidence: f64,
}

impl StudyInput {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidArgument(format!("{what} = {v}")));
        if !self.xi_hat.is_finite() {
            return bad("xi_hat must be finite, got", self.xi_hat);
        }
        if !(self.sampling_var > 0.0 && self.sampling_var.is_finite()) {
            return bad("sampling variance must be positive, got", self.sampling_var);
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad("sigma2 must be non-negative, got", self.sigma2);
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return bad("percentile must lie in (0, 1), got", self.percentile);
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence must lie in (0, 1), got", self.confidence);
        }
        Ok(())
    }

    /// `sqrt(sampling_var + sigma2)`
    pub fn scale(&self) -> f64 {
        math::sqrt(self.sampling_var + self.sigma2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhiInterval {
    /// Bounds on the log scale.
    pub lower: f64,
    pub upper: f64,
    /// Multipliers of the scale: `c_p - z` and `c_p + z`.
    pub lower_multiplier: f64,
    pub upper_multiplier: f64,
}

impl PhiInterval {
    /// Bounds on the risk-ratio scale.
    pub fn ratio_bounds(&self) -> (f64, f64) {
        (math::exp(self.lower), math::exp(self.upper))
    }
}

pub fn phi_ci(input: &StudyInput) -> Result<PhiInterval> {
    input.validate()?;
    let c = math::normal_quantile(input.percentile)?;
    let z = math::normal_quantile(0.5 + 0.5 * input.confidence)?;
    let s = input.scale();
    Ok(PhiInterval {
        lower: input.xi_hat + (c - z) * s,
        upper: input.xi_hat + (c + z) * s,
        lower_multiplier: c - z,
        upper_multiplier: c + z,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    RobustAbove1,
    RobustBelow1,
    NotRobust,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::RobustAbove1 => "robust_above_1",
            Verdict::RobustBelow1 => "robust_below_1",
            Verdict::NotRobust => "not_robust",
        }
    }
}

/// Whether the conclusion RR > 1 (or RR < 1) survives for the lower (or
/// upper) tail of the yearly population. The input percentile is folded to
/// the lower tail, `min(p, 1 - p)`; "above" is judged at that percentile and
/// "below" at its mirror image.
pub fn robustness_verdict(input: &StudyInput) -> Result<Verdict> {
    input.validate()?;
    let low = input.percentile.min(1.0 - input.percentile);
    let at = |p: f64| {
        phi_ci(&StudyInput {
            percentile: p,
            ..*input
        })
    };
    if at(low)?.lower > 0.0 {
        return Ok(Verdict::RobustAbove1);
    }
    if at(1.0 - low)?.upper < 0.0 {
        return Ok(Verdict::RobustBelow1);
    }
    Ok(Verdict::NotRobust)
}

/// Heuristic widening for an uncertain `sigma2`: the union of the intervals
/// at the two ends of a `sigma2` range. Not part of the known-variance
/// derivation.
pub fn phi_ci_sigma_range(input: &StudyInput, sigma2_low: f64, sigma2_high: f64) -> Result<PhiInterval> {
    if !(0.0 <= sigma2_low && sigma2_low <= sigma2_high && sigma2_high.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma2 range ({sigma2_low}, {sigma2_high}) is not ordered and non-negative"
        )));
    }
    let a = phi_ci(&StudyInput {
        sigma2: sigma2_low,
        ..*input
    })?;
    let b = phi_ci(&StudyInput {
        sigma2: sigma2_high,
        ..*input
    })?;
    Ok(PhiInterval {
        lower: a.lower.min(b.lower),
        upper: a.upper.max(b.upper),
        lower_multiplier: a.lower_multiplier,
        upper_multiplier: a.upper_multiplier,
    })
}
