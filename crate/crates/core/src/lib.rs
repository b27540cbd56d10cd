//! Time-varying extreme-event risk ratios from paired factual/counterfactual
//! ensemble counts.
//!
//! Monthly event counts `Z[k, t, j]` for the ALL (factual) and NAT
//! (counterfactual) scenarios are modelled as binomial draws whose logit
//! probabilities decompose into a scenario trend, shared and ALL-specific
//! yearly effects, and a sum-zero seasonal cycle:
//!
//! ```text
//! logit p[k,t,j] = b[k,0] + b[k,1] x[k,t] + alpha[t] + delta[t] 1{k = ALL} + gamma[j]
//! alpha[t] ~ N(0, tau2),  delta[t] ~ N(0, sigma2),  gamma[j] ~ N(0, omega2)
//! ```
//!
//! The standard deviation of `delta` measures how much interannual (ocean)
//! variability moves the log risk ratio from year to year.
//!
//! The crate is `no_std` (with `alloc`). File formats, the command line and
//! anything touching the filesystem live in the `eventrisk` crate.
//!
//! Modules:
//! - [`model`]: domain types, link function, likelihood and prior kernels
//! - [`sampler`]: the componentwise interweaving MCMC sampler and its tuning
//! - [`analysis`]: yearly probabilities, risk ratios, exceedance fractions
//! - [`single_year`]: population-percentile intervals for single-year studies
//! - [`oracle`]: synthetic data, grid posteriors and calibration harnesses
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` deliberately rejects NaN; indexed loops mirror the algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod math;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod single_year;
pub mod thresholds;

pub use error::{Error, Result};
pub use model::{
    CountPanel, CovariateSeries, EventType, LogitBound, ParamState, PriorConfig, Scenario, MONTHS,
};
pub use sampler::{run_sampler, PosteriorDraws, SamplerConfig};
