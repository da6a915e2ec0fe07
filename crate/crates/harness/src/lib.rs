//! Experiment runner for the discrete convex simulation-optimization solvers:
//! JSON configuration, seeded replication studies with exact cost
//! accounting, landscape scans and CSV output.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod landscape;
pub mod seeds;
pub mod selftest;

pub use config::{Algorithm, Engine, ExperimentConfig, Model};
pub use error::{HarnessError, Result};
pub use experiment::{
    records_csv, run_experiment, run_one, CostRow, Experiment, RunRecord, CSV_HEADER,
};
pub use landscape::{landscape_csv, landscape_scan, line_points, LandscapeRow};
pub use seeds::{seed_key, seed_stream, seed_tag};
pub use selftest::{run_selftest, Check};
