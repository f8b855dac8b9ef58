//! Representer-weight solvers for `(K + lambda I) alpha = g`.
//!
//! `solve_direct` factors the dense system; `solve_sdd` runs stochastic dual
//! descent: random-coordinate gradient estimates of the dual objective
//! `1/2 |alpha|^2_{K+lambda I} - alpha^T g`, Nesterov momentum, and geometric
//! iterate averaging. Each SDD iteration touches `b` rows of the system and a
//! handful of length-`N` vectors, so it costs O(b N).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gram::GramSystem;
use crate::linalg::{dot, norm, Cholesky};

/// Iterates with a norm above this are treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct RepresenterWeights {
    pub values: Vec<f64>,
    pub iterations_used: usize,
    pub final_primal_loss: Option<f64>,
}

impl RepresenterWeights {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            iterations_used: 0,
            final_primal_loss: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Stochastic dual descent settings. `None` fields are resolved against the
/// system at solve time.
#[derive(Debug, Clone, PartialEq)]
pub struct SddConfig {
    /// Iteration count `I`; default `max(50 N / b, 10 / r)`.
    pub iterations: Option<usize>,
    /// Mini-batch size `b`; default `min(128, N)`.
    pub batch_size: Option<usize>,
    /// Step size `beta`; default `0.5 N / trace(K + lambda I)`.
    pub step_size: Option<f64>,
    /// Momentum `rho` in `[0, 1)`.
    pub momentum: f64,
    /// Averaging weight `r` in `[0, 1]`.
    pub averaging: f64,
    pub seed: u64,
    /// Record losses every this many iterations; 0 disables.
    pub loss_check_every: usize,
    /// Step-size halvings allowed after detected divergence.
    pub max_halvings: usize,
}

impl Default for SddConfig {
    fn default() -> Self {
        Self {
            iterations: None,
            batch_size: None,
            step_size: None,
            momentum: 0.9,
            averaging: 0.001,
            seed: 0,
            loss_check_every: 0,
            max_halvings: 10,
        }
    }
}

/// An `SddConfig` with every field fixed for a particular system size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedSdd {
    pub iterations: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub momentum: f64,
    pub averaging: f64,
    pub seed: u64,
    pub loss_check_every: usize,
    pub max_halvings: usize,
}

impl SddConfig {
    pub fn resolve(&self, system: &GramSystem) -> Result<ResolvedSdd> {
        let n = system.len();
        if n == 0 {
            return Err(Error::EmptySystem);
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(0.0..=1.0).contains(&self.averaging) {
            return Err(Error::InvalidParameter(format!(
                "averaging weight must lie in [0, 1], got {}",
                self.averaging
            )));
        }
        let batch_size = self.batch_size.unwrap_or(n.min(128));
        if batch_size == 0 || batch_size > n {
            return Err(Error::InvalidParameter(format!(
                "batch size {batch_size} must lie in 1..={n}"
            )));
        }
        let step_size = match self.step_size {
            Some(b) => b,
            None => 0.5 * n as f64 / system.trace(),
        };
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {step_size}"
            )));
        }
        let iterations = match self.iterations {
            Some(i) => i,
            None => {
                let epochs = 50 * n / batch_size;
                let burn_in = if self.averaging > 0.0 {
                    (10.0 / self.averaging).ceil() as usize
                } else {
                    0
                };
                epochs.max(burn_in).max(1)
            }
        };
        if iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        Ok(ResolvedSdd {
            iterations,
            batch_size,
            step_size,
            momentum: self.momentum,
            averaging: self.averaging,
            seed: self.seed,
            loss_check_every: self.loss_check_every,
            max_halvings: self.max_halvings,
        })
    }
}

/// One convergence-trace record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub dual_loss: f64,
    pub primal_loss: f64,
    pub wall_seconds: f64,
}

/// Result of an SDD run with diagnostics.
#[derive(Debug, Clone)]
pub struct SddRun {
    pub weights: RepresenterWeights,
    pub trace: Vec<TraceRecord>,
    pub halvings: usize,
    pub config: ResolvedSdd,
}

/// `|x|_{K + lambda I}`; O(N^2).
pub fn system_norm(system: &GramSystem, x: &[f64]) -> f64 {
    dot(x, &system.matvec(x)).max(0.0).sqrt()
}

/// `1/2 |g - K alpha|^2 + lambda/2 |alpha|^2_K`; O(N^2).
pub fn primal_loss(system: &GramSystem, alpha: &[f64]) -> f64 {
    primal_loss_rhs(system, system.rhs(), alpha)
}

/// `1/2 |alpha|^2_{K + lambda I} - alpha^T g`; O(N^2).
pub fn dual_loss(system: &GramSystem, alpha: &[f64]) -> f64 {
    dual_loss_rhs(system, system.rhs(), alpha)
}

/// Factors `K + lambda I` and solves for the weights, with up to five steps
/// of iterative refinement toward `|(K + lambda I) alpha - g| <= 1e-8 |g|`.
pub fn solve_direct_with_factor(system: &GramSystem) -> Result<(RepresenterWeights, Cholesky)> {
    solve_direct_rhs(system, system.rhs())
}

/// Like `solve_direct_with_factor` but for an arbitrary right-hand side.
pub fn solve_direct_rhs(
    system: &GramSystem,
    rhs: &[f64],
) -> Result<(RepresenterWeights, Cholesky)> {
    if system.is_empty() {
        return Err(Error::EmptySystem);
    }
    let k = system.dense().ok_or(Error::DenseUnavailable)?;
    let chol = Cholesky::factor(k, system.lambda())?;
    let x = refine(system, &chol, rhs, chol.solve(rhs));
    Ok((
        RepresenterWeights {
            values: x,
            iterations_used: 0,
            final_primal_loss: None,
        },
        chol,
    ))
}

pub(crate) fn refine(system: &GramSystem, chol: &Cholesky, rhs: &[f64], mut x: Vec<f64>) -> Vec<f64> {
    let target = 1e-8 * norm(rhs);
    let mut best = residual(system, rhs, &x);
    for _ in 0..5 {
        if norm(&best) <= target {
            break;
        }
        let dx = chol.solve(&best);
        let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let r = residual(system, rhs, &cand);
        if norm(&r) >= norm(&best) {
            break;
        }
        x = cand;
        best = r;
    }
    x
}

fn residual(system: &GramSystem, rhs: &[f64], x: &[f64]) -> Vec<f64> {
    system
        .matvec(x)
        .iter()
        .zip(rhs)
        .map(|(a, g)| g - a)
        .collect()
}

pub fn solve_direct(system: &GramSystem) -> Result<RepresenterWeights> {
    solve_direct_with_factor(system).map(|(w, _)| w)
}

/// Stochastic dual descent from a zero start.
pub fn solve_sdd(system: &GramSystem, config: &SddConfig) -> Result<RepresenterWeights> {
    let init = vec![0.0; system.len()];
    run_sdd(system, system.rhs(), config, &init).map(|r| r.weights)
}

/// Stochastic dual descent for right-hand side `rhs`, started from `init`
/// (the averaged iterate also starts at `init`). A run diverges when
/// `|alpha|` exceeds `DIVERGENCE_NORM` or when it ends with a higher dual
/// objective than it started with; it is then restarted with half the step
/// size, up to `max_halvings` times.
pub fn run_sdd(
    system: &GramSystem,
    rhs: &[f64],
    config: &SddConfig,
    init: &[f64],
) -> Result<SddRun> {
    let resolved = config.resolve(system)?;
    let n = system.len();
    if init.len() != n || rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if init.len() != n { init.len() } else { rhs.len() },
        });
    }
    let mut step = resolved.step_size;
    for halvings in 0..=resolved.max_halvings {
        let cfg = ResolvedSdd {
            step_size: step,
            ..resolved
        };
        if let Some((weights, trace)) = sdd_attempt(system, rhs, &cfg, init) {
            // A run that ends above its starting dual objective has diverged
            // without reaching the norm threshold.
            let start = dual_loss_rhs(system, rhs, init);
            let end = dual_loss_rhs(system, rhs, &weights.values);
            if end.is_nan() || end > start + 1e-9 * start.abs() {
                step *= 0.5;
                continue;
            }
            return Ok(SddRun {
                weights,
                trace,
                halvings,
                config: cfg,
            });
        }
        step *= 0.5;
    }
    Err(Error::StepSizeTooLarge {
        halvings: resolved.max_halvings,
    })
}

/// Single-run SDD state, advanced one iteration at a time. No divergence
/// recovery; see `run_sdd` for that.
pub struct SddStepper<'a> {
    system: &'a GramSystem,
    rhs: &'a [f64],
    cfg: ResolvedSdd,
    rng: ChaCha8Rng,
    scale: f64,
    alpha: Vec<f64>,
    velocity: Vec<f64>,
    averaged: Vec<f64>,
    lookahead: Vec<f64>,
    grad: Vec<(usize, f64)>,
    iteration: usize,
}

impl<'a> SddStepper<'a> {
    pub fn new(system: &'a GramSystem, rhs: &'a [f64], cfg: &ResolvedSdd, init: &[f64]) -> Self {
        let n = system.len();
        assert_eq!(init.len(), n);
        assert_eq!(rhs.len(), n);
        Self {
            system,
            rhs,
            cfg: *cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            scale: n as f64 / cfg.batch_size as f64,
            alpha: init.to_vec(),
            velocity: vec![0.0; n],
            averaged: init.to_vec(),
            lookahead: vec![0.0; n],
            grad: Vec::with_capacity(cfg.batch_size),
            iteration: 0,
        }
    }

    /// One iteration. Returns `false` once `|alpha|` exceeds the divergence threshold.
    pub fn step(&mut self) -> bool {
        let n = self.alpha.len();
        let (rho, beta, r) = (self.cfg.momentum, self.cfg.step_size, self.cfg.averaging);
        for k in 0..n {
            self.lookahead[k] = self.alpha[k] + rho * self.velocity[k];
        }
        self.grad.clear();
        for _ in 0..self.cfg.batch_size {
            let j = self.rng.random_range(0..n);
            let resid = self.system.row_dot(j, &self.lookahead) - self.rhs[j];
            self.grad.push((j, self.scale * resid));
        }
        for v in self.velocity.iter_mut() {
            *v *= rho;
        }
        for &(j, gj) in &self.grad {
            self.velocity[j] -= beta * gj;
        }
        let mut norm2 = 0.0;
        for k in 0..n {
            self.alpha[k] += self.velocity[k];
            self.averaged[k] = r * self.alpha[k] + (1.0 - r) * self.averaged[k];
            norm2 += self.alpha[k] * self.alpha[k];
        }
        self.iteration += 1;
        norm2 <= DIVERGENCE_NORM * DIVERGENCE_NORM
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn current(&self) -> &[f64] {
        &self.alpha
    }

    pub fn averaged(&self) -> &[f64] {
        &self.averaged
    }

    pub fn into_averaged(self) -> Vec<f64> {
        self.averaged
    }
}

fn sdd_attempt(
    system: &GramSystem,
    rhs: &[f64],
    cfg: &ResolvedSdd,
    init: &[f64],
) -> Option<(RepresenterWeights, Vec<TraceRecord>)> {
    let start = Instant::now();
    let mut stepper = SddStepper::new(system, rhs, cfg, init);
    let mut trace = Vec::new();
    while stepper.iteration() < cfg.iterations {
        if !stepper.step() {
            return None;
        }
        let it = stepper.iteration();
        if cfg.loss_check_every > 0 && it.is_multiple_of(cfg.loss_check_every) {
            trace.push(TraceRecord {
                iteration: it,
                dual_loss: dual_loss_rhs(system, rhs, stepper.current()),
                primal_loss: primal_loss_rhs(system, rhs, stepper.current()),
                wall_seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    let averaged = stepper.into_averaged();
    let final_primal_loss =
        (cfg.loss_check_every > 0).then(|| primal_loss_rhs(system, rhs, &averaged));
    Some((
        RepresenterWeights {
            values: averaged,
            iterations_used: cfg.iterations,
            final_primal_loss,
        },
        trace,
    ))
}

fn primal_loss_rhs(system: &GramSystem, rhs: &[f64], alpha: &[f64]) -> f64 {
    let ka = system.kernel_matvec(alpha);
    let resid: f64 = rhs.iter().zip(&ka).map(|(g, k)| (g - k) * (g - k)).sum();
    0.5 * resid + 0.5 * system.lambda() * dot(alpha, &ka)
}

fn dual_loss_rhs(system: &GramSystem, rhs: &[f64], alpha: &[f64]) -> f64 {
    0.5 * dot(alpha, &system.matvec(alpha)) - dot(alpha, rhs)
}
