//! Case runs, run reports and CSV outputs.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;

use gp_pde::adapt::{active_learning_loop, evaluation_grid, ALHistory};
use gp_pde::{PosteriorModel, ProblemSpec};

use crate::config::RunConfig;

pub struct RunOutcome {
    pub model: PosteriorModel,
    pub problem: ProblemSpec,
    pub history: ALHistory,
    pub wall_seconds: f64,
}

/// Builds the initial set and runs the active-learning loop.
pub fn run_case(cfg: &RunConfig) -> anyhow::Result<RunOutcome> {
    let problem = cfg.case.problem();
    let start = Instant::now();
    let initial = problem.initial_set(cfg.initial_interior, cfg.initial_boundary, 0)?;
    let (model, history) = active_learning_loop(
        &problem,
        initial,
        &cfg.kernel,
        cfg.lambda(),
        &cfg.al,
        &cfg.weight_solver(),
    )
    .with_context(|| format!("active learning on {}", cfg.case))?;
    Ok(RunOutcome {
        model,
        problem,
        history,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub case: String,
    pub seed: u64,
    pub relative_mse_percent: Option<f64>,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub wall_time_seconds: f64,
    pub peak_memory_estimate_bytes: usize,
    pub variance_clamps: usize,
    pub history: ALHistory,
    pub grid_dump_path: PathBuf,
    /// Published PINN relative MSE for this case, for reference.
    pub pinn_reference_percent: f64,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case            {}", self.case)?;
        writeln!(f, "seed            {}", self.seed)?;
        writeln!(
            f,
            "points          {} ({} interior, {} boundary)",
            self.n_interior + self.n_boundary,
            self.n_interior,
            self.n_boundary
        )?;
        match self.relative_mse_percent {
            Some(m) => writeln!(f, "relative MSE    {m:.4}%")?,
            None => writeln!(f, "relative MSE    n/a (no ground truth)")?,
        }
        if let Some(last) = self.history.records.last() {
            writeln!(
                f,
                "mean variance   {:.4e} -> {:.4e} over {} iterations ({:?})",
                self.history.initial_mean_variance,
                last.mean_variance,
                self.history.records.len(),
                self.history.status
            )?;
        }
        writeln!(f, "wall time       {:.3} s", self.wall_time_seconds)?;
        writeln!(f, "memory estimate {} bytes", self.peak_memory_estimate_bytes)?;
        if self.variance_clamps > 0 {
            writeln!(f, "variance clamps {}", self.variance_clamps)?;
        }
        writeln!(f, "PINN reference  {:.2}% (published, not recomputed)", self.pinn_reference_percent)?;
        write!(f, "grid dump       {}", self.grid_dump_path.display())
    }
}

/// Runs the case and writes the grid dump into `out_dir`.
pub fn run_and_report(cfg: &RunConfig, out_dir: &Path) -> anyhow::Result<RunReport> {
    let outcome = run_case(cfg)?;
    let grid = evaluation_grid(&outcome.problem.domain, cfg.al.eval_size)?;
    let rows = grid_rows(&outcome.model, &outcome.problem, &grid)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let path = out_dir.join(format!("{}-grid.csv", cfg.case));
    write_grid_dump(&path, &coordinate_names(&outcome.problem), &rows)?;

    let colset = outcome.model.system().colset();
    let relative_mse_percent = outcome.history.records.last().map_or(outcome.history.initial_rel_mse, |r| r.rel_mse);
    Ok(RunReport {
        case: cfg.case.to_string(),
        seed: cfg.seed(),
        relative_mse_percent,
        n_interior: colset.n_interior(),
        n_boundary: colset.n_boundary(),
        wall_time_seconds: outcome.wall_seconds,
        peak_memory_estimate_bytes: outcome.model.memory_bytes(),
        variance_clamps: outcome.model.clamp_count(),
        history: outcome.history,
        grid_dump_path: path,
        pinn_reference_percent: cfg.case.pinn_reference(),
    })
}

pub fn coordinate_names(problem: &ProblemSpec) -> Vec<&'static str> {
    match problem.dim() {
        2 if problem.name == "heat-1d" => vec!["x", "t"],
        2 => vec!["x", "y"],
        3 => vec!["x", "y", "z"],
        d => ["x1", "x2", "x3", "x4", "x5", "x6"][..d].to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub coords: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub truth: Option<f64>,
}

impl GridRow {
    pub fn abs_error(&self) -> Option<f64> {
        self.truth.map(|t| (self.mean - t).abs())
    }
}

pub fn grid_rows(
    model: &PosteriorModel,
    problem: &ProblemSpec,
    grid: &[gp_pde::Point],
) -> gp_pde::Result<Vec<GridRow>> {
    grid.iter()
        .map(|z| {
            Ok(GridRow {
                coords: z.to_vec(),
                mean: model.mean(z)?,
                std: model.variance(z)?.sqrt(),
                truth: problem.truth(z),
            })
        })
        .collect()
}

/// Seventeen significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes `bytes` to `path` through a temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    write_atomic(path, &bytes)
}

pub const GRID_VALUE_COLUMNS: [&str; 4] = ["mean", "std", "truth", "abs_error"];

pub fn write_grid_dump(path: &Path, coord_names: &[&str], rows: &[GridRow]) -> anyhow::Result<()> {
    let header: Vec<&str> = coord_names.iter().copied().chain(GRID_VALUE_COLUMNS).collect();
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            r.coords
                .iter()
                .map(|&c| fmt_f64(c))
                .chain([
                    fmt_f64(r.mean),
                    fmt_f64(r.std),
                    fmt_opt(r.truth),
                    fmt_opt(r.abs_error()),
                ])
                .collect::<Vec<_>>()
        }),
    )
}

pub const TRACE_COLUMNS: [&str; 5] = ["iter", "N", "mean_variance", "rel_mse", "wall_s"];

/// Convergence trace; row 0 is the initial fit, `wall_s` is cumulative.
pub fn write_trace(path: &Path, history: &ALHistory, initial_n: usize) -> anyhow::Result<()> {
    let mut rows = vec![vec![
        "0".to_string(),
        initial_n.to_string(),
        fmt_f64(history.initial_mean_variance),
        fmt_opt(history.initial_rel_mse),
        fmt_f64(history.initial_wall_seconds),
    ]];
    let mut wall = history.initial_wall_seconds;
    for r in &history.records {
        wall += r.wall_seconds;
        rows.push(vec![
            r.iteration.to_string(),
            r.n_total.to_string(),
            fmt_f64(r.mean_variance),
            fmt_opt(r.rel_mse),
            fmt_f64(wall),
        ]);
    }
    write_csv(path, &TRACE_COLUMNS, rows)
}

pub const SWEEP_COLUMNS: [&str; 4] = ["N", "rel_mse", "wall_s", "mem_bytes"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub rel_mse: f64,
    pub wall_seconds: f64,
    pub mem_bytes: usize,
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> anyhow::Result<()> {
    write_csv(
        path,
        &SWEEP_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.rel_mse),
                fmt_f64(r.wall_seconds),
                r.mem_bytes.to_string(),
            ]
        }),
    )
}
