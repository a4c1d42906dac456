//! Transmission and storage expansion planning.
//!
//! The crate is organized along the planning pipeline:
//!
//! * [`grid`] parses MATPOWER-style cases and applies year-projection scaling.
//! * [`scenario`] clusters a year of hourly data into weighted representative days.
//! * [`milp`] holds a solver-agnostic MILP model, a bounded-variable simplex with
//!   branch-and-bound, MPS I/O and an external solver adapter.
//! * [`tep`] assembles the two-stage transmission+storage model and decodes solutions.
//! * [`recourse`] evaluates operations for fixed investments.
//! * [`candidates`] selects storage candidate buses from recourse diagnostics.
//! * [`planner`] runs the multi-stage investment loop and storage-cost sweeps.
//! * [`report`] writes JSON, CSV and GeoJSON artifacts.

pub mod candidates;
pub mod error;
pub mod grid;
pub mod milp;
pub mod planner;
pub mod recourse;
pub mod report;
pub mod scenario;
pub mod tep;

#[cfg(test)]
mod testkit;

pub use error::{Error, Result};
