//! File formats, run orchestration and the command-line front end for
//! `eventrisk-core`.

pub mod bounds;
pub mod cli;
pub mod covariates;
pub mod error;
pub mod fit;
pub mod generate;
pub mod keyval;
pub mod manifest;
pub mod output;
pub mod region;
pub mod table;

pub use error::{AppError, AppResult};
pub use manifest::Manifest;
