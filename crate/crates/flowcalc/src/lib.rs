//! File formats and the `flowcalc` command-line front end for [`flowcalc_core`].
//!
//! - [`system`]: JSON documents for fields, systems and observables, plus the builtin catalog,
//! - [`schedule`]: control schedules and planner results as CSV and JSON,
//! - [`report`]: CSV/JSON writers for probe tables,
//! - [`cli`]: argument parsing and subcommand dispatch.

pub mod cli;
pub mod error;
pub mod report;
pub mod schedule;
pub mod system;

pub use error::{CliError, CliResult};
