//! Experiment harness for the `homproj` integrators: TOML experiment files,
//! single runs with reference comparison, cost/error sweeps and one-step
//! convergence studies, written as JSON and CSV.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::result_large_err)]

pub mod config;
pub mod converge;
pub mod error;
pub mod registry;
pub mod run;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
