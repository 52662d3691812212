//! File formats and commands for smoothing-spline ANOVA fits.
//!
//! Specs and fits are JSON (versioned by `schema_version`), tables are CSV.
//! Every artifact is written through a temporary file and renamed into place.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod commands;
pub mod data;
pub mod error;
pub mod fitting;
pub mod simulate;
pub mod spec;

pub use commands::{run_components, run_fit, run_predict, run_simulate, run_tune, RunConfig, DEFAULT_SEED};
pub use error::{CliError, Result, EXIT_NUMERICAL, EXIT_USAGE};
