//! Seeded experiment harness for rpmix: each experiment sweeps a parameter,
//! runs independent trials in parallel, and produces a CSV report with
//! per-trial rows and grouped aggregates.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{Experiment, ExperimentConfig, Value};
pub use error::{ExpError, Result};
pub use experiments::run;
pub use report::{Report, TrialRow};
