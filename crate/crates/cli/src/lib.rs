//! Batch front end: reads a JSON experiment file, computes the requested bounds,
//! runs the matching simulations and writes CSV or JSON reports.

pub mod config;
pub mod report;
pub mod run;

pub use config::{load, parse, Experiment, Overrides, Scenario};
pub use run::{run_bound, run_certify, run_validate, Report};
