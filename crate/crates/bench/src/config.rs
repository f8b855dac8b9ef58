//! Run configuration: per-case defaults overridden by an optional TOML file
//! with `[kernel]`, `[sdd]`, `[al]` and `[case]` sections.

use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;

use gp_pde::adapt::{ALConfig, WeightSolver};
use gp_pde::gram::default_lambda;
use gp_pde::{KernelParams, SddConfig};

use crate::cases::Case;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Direct,
    Sdd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub case: Case,
    pub kernel: KernelParams,
    /// Gram regularization; `None` means `1e-8 s^4`.
    pub lambda: Option<f64>,
    pub sdd: SddConfig,
    pub al: ALConfig,
    pub solver: SolverKind,
    pub initial_interior: usize,
    pub initial_boundary: usize,
    /// Collocation budgets for `sweep`.
    pub sweep_sizes: Vec<usize>,
}

impl RunConfig {
    pub fn for_case(case: Case) -> Self {
        let (initial_interior, initial_boundary, clusters, budget): (usize, usize, usize, usize) = match case {
            Case::PoissonDisk => (5, 3, 5, 73),
            Case::Poisson3d => (10, 10, 20, 300),
            Case::Heat1d => (10, 10, 15, 200),
        };
        let initial = initial_interior + initial_boundary;
        let sweep_sizes = match case {
            Case::PoissonDisk => vec![23, 48, 73, 148],
            Case::Poisson3d => vec![100, 200, 300],
            Case::Heat1d => vec![50, 110, 200],
        };
        Self {
            case,
            kernel: case.default_kernel(),
            lambda: None,
            sdd: SddConfig::default(),
            al: ALConfig {
                cluster_count: clusters,
                max_iterations: (budget - initial).div_ceil(clusters),
                max_points: Some(budget),
                ..ALConfig::default()
            },
            solver: SolverKind::Sdd,
            initial_interior,
            initial_boundary,
            sweep_sizes,
        }
    }

    /// Defaults for `case` with the overrides in a TOML file applied.
    pub fn load(case: Case, path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::for_case(case);
        cfg.apply_toml(&text)
            .with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn apply_toml(&mut self, text: &str) -> anyhow::Result<()> {
        let file: ConfigFile = toml::from_str(text)?;
        file.apply(self)
    }

    /// Seeds every stochastic component.
    pub fn set_seed(&mut self, seed: u64) {
        self.al.seed = seed;
        self.sdd.seed = seed;
    }

    pub fn seed(&self) -> u64 {
        self.al.seed
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or_else(|| default_lambda(&self.kernel))
    }

    pub fn weight_solver(&self) -> WeightSolver {
        match self.solver {
            SolverKind::Direct => WeightSolver::Direct,
            SolverKind::Sdd => WeightSolver::Sdd(self.sdd.clone()),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    kernel: KernelSection,
    #[serde(default)]
    sdd: SddSection,
    #[serde(default)]
    al: AlSection,
    #[serde(default)]
    case: CaseSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    signal: Option<f64>,
    lengthscales: Option<Vec<f64>>,
    lambda: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SddSection {
    iterations: Option<usize>,
    batch_size: Option<usize>,
    step_size: Option<f64>,
    momentum: Option<f64>,
    averaging: Option<f64>,
    max_halvings: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlSection {
    pool_size: Option<usize>,
    exclusion_radius: Option<f64>,
    retain_fraction: Option<f64>,
    cluster_count: Option<usize>,
    boundary_fraction: Option<f64>,
    max_iterations: Option<usize>,
    stop_tolerance: Option<f64>,
    max_points: Option<usize>,
    probe_size: Option<usize>,
    eval_size: Option<usize>,
    mc_samples: Option<usize>,
    dense_cap: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseSection {
    seed: Option<u64>,
    solver: Option<SolverKind>,
    initial_interior: Option<usize>,
    initial_boundary: Option<usize>,
    sweep_sizes: Option<Vec<usize>>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigFile {
    fn apply(self, cfg: &mut RunConfig) -> anyhow::Result<()> {
        let k = self.kernel;
        if k.signal.is_some() || k.lengthscales.is_some() {
            cfg.kernel = KernelParams::new(
                k.signal.unwrap_or(cfg.kernel.signal()),
                k.lengthscales.unwrap_or_else(|| cfg.kernel.lengthscales().to_vec()),
            )?;
        }
        if cfg.kernel.dim() != cfg.case.problem().dim() {
            bail!(
                "kernel has {} lengthscales but {} is {}-dimensional",
                cfg.kernel.dim(),
                cfg.case,
                cfg.case.problem().dim()
            );
        }
        if k.lambda.is_some() {
            cfg.lambda = k.lambda;
        }

        let s = self.sdd;
        if s.iterations.is_some() {
            cfg.sdd.iterations = s.iterations;
        }
        if s.batch_size.is_some() {
            cfg.sdd.batch_size = s.batch_size;
        }
        if s.step_size.is_some() {
            cfg.sdd.step_size = s.step_size;
        }
        set(&mut cfg.sdd.momentum, s.momentum);
        set(&mut cfg.sdd.averaging, s.averaging);
        set(&mut cfg.sdd.max_halvings, s.max_halvings);

        let a = self.al;
        set(&mut cfg.al.pool_size, a.pool_size);
        set(&mut cfg.al.exclusion_radius, a.exclusion_radius);
        set(&mut cfg.al.retain_fraction, a.retain_fraction);
        set(&mut cfg.al.cluster_count, a.cluster_count);
        set(&mut cfg.al.boundary_fraction, a.boundary_fraction);
        set(&mut cfg.al.max_iterations, a.max_iterations);
        set(&mut cfg.al.stop_tolerance, a.stop_tolerance);
        set(&mut cfg.al.probe_size, a.probe_size);
        set(&mut cfg.al.eval_size, a.eval_size);
        set(&mut cfg.al.mc_samples, a.mc_samples);
        set(&mut cfg.al.dense_cap, a.dense_cap);
        if a.max_points.is_some() {
            cfg.al.max_points = a.max_points;
        }

        let c = self.case;
        if let Some(seed) = c.seed {
            cfg.set_seed(seed);
        }
        set(&mut cfg.solver, c.solver);
        set(&mut cfg.initial_interior, c.initial_interior);
        set(&mut cfg.initial_boundary, c.initial_boundary);
        set(&mut cfg.sweep_sizes, c.sweep_sizes);

        cfg.al.validate()?;
        Ok(())
    }
}
