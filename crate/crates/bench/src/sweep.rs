//! Scalability sweeps and SDD per-iteration timing.

use std::time::Instant;

use anyhow::Context;

use gp_pde::adapt::{evaluation_grid, model_rel_mse};
use gp_pde::gram::assemble_dense_with_cap;
use gp_pde::solvers::{solve_direct_with_factor, SddStepper};
use gp_pde::{GramSystem, PosteriorModel, ProblemSpec, SddConfig, VarianceMode};

use crate::config::RunConfig;
use crate::report::{run_case, SweepRow};

pub const DIRECT_CAP: usize = 5_000;
pub const SDD_CAP: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Cholesky solve on a Sobol set, no active learning.
    Direct,
    /// SDD with active learning.
    SddAl,
}

impl std::str::FromStr for SweepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(Self::Direct),
            "sdd-al" => Ok(Self::SddAl),
            _ => Err(format!("unknown sweep mode '{s}' (expected direct or sdd-al)")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Sizes left out, with the reason.
    pub skipped: Vec<(usize, String)>,
}

/// Bytes for the dense Gram matrix and its Cholesky factor.
pub fn direct_memory_bytes(n: usize) -> usize {
    2 * n * n * std::mem::size_of::<f64>()
}

/// Bytes for matrix-free SDD: coordinates, one Gram row, the five length-N
/// iterate/target vectors and the batch gradient.
pub fn sdd_memory_bytes(n: usize, dim: usize, batch: usize) -> usize {
    (n * (dim + 1 + 5) + 2 * batch) * std::mem::size_of::<f64>()
}

/// Sobol collocation set of `n` points, `round(boundary_fraction * n)` on the boundary.
pub fn sobol_system(
    problem: &ProblemSpec,
    cfg: &RunConfig,
    n: usize,
    skip: u64,
    dense: bool,
) -> gp_pde::Result<GramSystem> {
    let n_b = ((n as f64) * cfg.al.boundary_fraction).round() as usize;
    let set = problem.initial_set(n - n_b, n_b, skip)?;
    if dense {
        assemble_dense_with_cap(set, cfg.kernel.clone(), cfg.lambda(), DIRECT_CAP)
    } else {
        GramSystem::matrix_free(set, cfg.kernel.clone(), cfg.lambda())
    }
}

pub fn scalability_sweep(cfg: &RunConfig, sizes: &[usize], mode: SweepMode) -> anyhow::Result<SweepTable> {
    let problem = cfg.case.problem();
    let mut table = SweepTable::default();
    match mode {
        SweepMode::Direct => {
            let grid = evaluation_grid(&problem.domain, cfg.al.eval_size)?;
            for &n in sizes {
                if n > DIRECT_CAP {
                    table.skipped.push((n, format!("direct mode capped at {DIRECT_CAP} points")));
                    continue;
                }
                let start = Instant::now();
                let system = sobol_system(&problem, cfg, n, 0, true)?;
                let (w, factor) = solve_direct_with_factor(&system)
                    .with_context(|| format!("direct solve at N = {n}"))?;
                let wall_seconds = start.elapsed().as_secs_f64();
                let model = PosteriorModel::with_factor(system, w, VarianceMode::Exact, factor)?;
                let rel_mse = model_rel_mse(&model, &problem, &grid)?.context("case has no ground truth")?;
                table.rows.push(SweepRow {
                    n,
                    rel_mse,
                    wall_seconds,
                    mem_bytes: direct_memory_bytes(n),
                });
            }
        }
        SweepMode::SddAl => {
            let start_n = cfg.initial_interior + cfg.initial_boundary;
            let mut wanted = Vec::new();
            for &n in sizes {
                if n > SDD_CAP {
                    table.skipped.push((n, format!("SDD mode capped at {SDD_CAP} points")));
                } else if n <= start_n {
                    table.skipped.push((n, format!("not above the initial {start_n} points")));
                } else {
                    wanted.push(n);
                }
            }
            let Some(&largest) = wanted.iter().max() else {
                return Ok(table);
            };
            let mut run_cfg = cfg.clone();
            run_cfg.al.max_points = Some(largest);
            run_cfg.al.max_iterations = (largest - start_n).div_ceil(cfg.al.cluster_count);
            run_cfg.al.stop_tolerance = 0.0;
            let outcome = run_case(&run_cfg)?;
            let batch = cfg.sdd.batch_size.unwrap_or(128);
            let mut wall = outcome.history.initial_wall_seconds;
            let mut records = outcome.history.records.iter().map(|r| {
                wall += r.wall_seconds;
                (r, wall)
            });
            wanted.sort_unstable();
            let mut current = records.next();
            for n in wanted {
                while current.is_some_and(|(r, _)| r.n_total < n) {
                    current = records.next();
                }
                match current {
                    Some((r, wall_seconds)) => table.rows.push(SweepRow {
                        n: r.n_total,
                        rel_mse: r.rel_mse.context("case has no ground truth")?,
                        wall_seconds,
                        mem_bytes: sdd_memory_bytes(r.n_total, problem.dim(), batch.min(r.n_total)),
                    }),
                    None => table.skipped.push((n, format!("active learning stopped ({:?})", outcome.history.status))),
                }
            }
        }
    }
    Ok(table)
}

/// Median wall time of one SDD iteration on a matrix-free Sobol system of
/// `n` points, over `iterations` timed steps after a short warm-up.
pub fn median_iteration_seconds(
    cfg: &RunConfig,
    n: usize,
    batch: usize,
    iterations: usize,
) -> anyhow::Result<f64> {
    let problem = cfg.case.problem();
    let system = sobol_system(&problem, cfg, n, 0, false)?;
    let sdd = SddConfig {
        batch_size: Some(batch),
        iterations: Some(iterations),
        ..cfg.sdd.clone()
    };
    let resolved = sdd.resolve(&system)?;
    let init = vec![0.0; n];
    let mut stepper = SddStepper::new(&system, system.rhs(), &resolved, &init);
    for _ in 0..iterations.min(10) {
        stepper.step();
    }
    let mut times: Vec<f64> = (0..iterations)
        .map(|_| {
            let t = Instant::now();
            stepper.step();
            t.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_growth() {
        let d1 = direct_memory_bytes(1000);
        let d2 = direct_memory_bytes(2000);
        assert_eq!(d2, 4 * d1);
        let s1 = sdd_memory_bytes(1000, 2, 128);
        let s2 = sdd_memory_bytes(2000, 2, 128);
        assert!((s2 as f64 / s1 as f64) < 2.0 && s2 > s1);
        assert!(sdd_memory_bytes(5000, 3, 128) < direct_memory_bytes(5000) / 100);
    }

    #[test]
    fn modes_parse() {
        assert_eq!("direct".parse::<SweepMode>().unwrap(), SweepMode::Direct);
        assert_eq!("sdd-al".parse::<SweepMode>().unwrap(), SweepMode::SddAl);
        assert!("both".parse::<SweepMode>().is_err());
    }
}
