//! Experiment harness for the intrinsic square function workbench:
//! configuration, input suites, theorem and lemma sweeps, convergence
//! certification and CSV reports.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod session;
pub mod suite;
pub mod tools;

pub use config::{ExperimentConfig, ExperimentId};
pub use error::{CliError, Result};
pub use report::ReportRow;
