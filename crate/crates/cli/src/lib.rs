//! Scenario runner for the `sdefl-core` models: declarative TOML scenarios,
//! simulate → filter → estimate pipelines, CSV and SVG artifacts, calibration
//! timing and the full reproduction suite.

// `!(x > 0.0)` is the idiom here because it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod output;
pub mod run;
pub mod scenario;

pub use error::{CliError, Result};
pub use run::{
    benchmark, execute, reproduce, run_scenario, run_table5_sweep, Comparison, Data, Phases, Reproduction, RunReport,
};
pub use scenario::{MethodKind, Scenario};
