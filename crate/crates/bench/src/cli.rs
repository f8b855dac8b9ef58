//! Command-line entry point.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::cases::Case;
use crate::config::RunConfig;
use crate::report::{run_and_report, run_case, write_sweep, write_trace};
use crate::sweep::{scalability_sweep, SweepMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gp-pde-bench", version, about = "Benchmark runs for the GP collocation PDE solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// poisson-disk, poisson-3d or heat-1d
    pub case: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with [kernel], [sdd], [al] and [case] sections
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run active learning and write the evaluation-grid dump
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Exit with status 2 if the relative MSE exceeds the case threshold
        #[arg(long)]
        check: bool,
    },
    /// Relative MSE, wall time and memory estimate against N
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "sdd-al")]
        mode: SweepMode,
        /// Comma-separated N values; defaults to the config
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Per-iteration convergence trace of the active-learning loop
    Trace {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Relative MSE (percent) accepted by `run --check`.
pub fn check_threshold(case: Case) -> f64 {
    match case {
        Case::PoissonDisk => 3.0,
        Case::Poisson3d | Case::Heat1d => 5.0,
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, (i32, String)> {
    let case: Case = common.case.parse().map_err(|e: String| {
        (
            EXIT_ERROR,
            format!("{e}\n\nUsage: gp-pde-bench <run|sweep|trace> <CASE> [--seed N] [--config FILE] [--out PATH]"),
        )
    })?;
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(case, path).map_err(|e| (EXIT_ERROR, format!("{e:#}")))?,
        None => RunConfig::for_case(case),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<i32, (i32, String)> {
    let fail = |e: anyhow::Error| (EXIT_ERROR, format!("error: {e:#}"));
    match command {
        Command::Run { common, check } => {
            let cfg = load_config(&common)?;
            let out = common.out.unwrap_or_else(|| PathBuf::from("results"));
            let report = run_and_report(&cfg, &out).map_err(fail)?;
            println!("{report}");
            if check {
                let limit = check_threshold(cfg.case);
                match report.relative_mse_percent {
                    Some(m) if m <= limit => println!("check: PASS ({m:.4}% <= {limit}%)"),
                    Some(m) => {
                        println!("check: FAIL ({m:.4}% > {limit}%)");
                        return Ok(EXIT_CHECK_FAILED);
                    }
                    None => {
                        println!("check: FAIL (no ground truth)");
                        return Ok(EXIT_CHECK_FAILED);
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Sweep { common, mode, sizes } => {
            let cfg = load_config(&common)?;
            let sizes = sizes.unwrap_or_else(|| cfg.sweep_sizes.clone());
            let table = scalability_sweep(&cfg, &sizes, mode).map_err(fail)?;
            for (n, why) in &table.skipped {
                eprintln!("skipped N = {n}: {why}");
            }
            let out = common.out.unwrap_or_else(|| PathBuf::from(format!("{}-sweep.csv", cfg.case)));
            write_sweep(&out, &table.rows).map_err(fail)?;
            println!("wrote {} rows to {}", table.rows.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::Trace { common } => {
            let cfg = load_config(&common)?;
            let outcome = run_case(&cfg).map_err(fail)?;
            let out = common.out.unwrap_or_else(|| PathBuf::from(format!("{}-trace.csv", cfg.case)));
            write_trace(&out, &outcome.history, cfg.initial_interior + cfg.initial_boundary).map_err(fail)?;
            println!("wrote {} iterations to {}", outcome.history.records.len(), out.display());
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("{msg}");
            code
        }
    }
}
