//! Benchmark cases, configuration, reports and sweeps for the `gp-pde` solver.

pub mod cases;
pub mod cli;
pub mod config;
pub mod report;
pub mod sweep;

pub use cases::Case;
pub use config::{RunConfig, SolverKind};
pub use report::{run_and_report, run_case, RunReport};
