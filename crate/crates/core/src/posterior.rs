//! Posterior mean and variance, random-Fourier-feature prior draws, and
//! pathwise (Matheron) posterior samples.
//!
//! A posterior sample is `u(z) + A(z)^T alpha - A(z)^T beta`, where `u` is a
//! prior draw and `beta = (K + lambda I)^{-1} (O[u](Z) + eps)` with
//! `eps ~ N(0, lambda I)`. Averaged over draws this reproduces the posterior
//! mean; its covariance is exactly `k(z,z') - A(z)^T (K + lambda I)^{-1} A(z')`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::gram::{cross_vector, GramSystem};
use crate::kernels::{KernelParams, OperatorSpec};
use crate::linalg::{dot, Cholesky};
use crate::solvers::{refine, run_sdd, RepresenterWeights, SddConfig};

/// Default number of random Fourier features per prior draw.
pub const DEFAULT_FEATURES: usize = 1024;

/// How per-sample `beta` weights are solved.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSolver {
    Direct,
    Sdd(SddConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSettings {
    pub samples: usize,
    pub seed: u64,
    pub features: usize,
    pub solver: SampleSolver,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarianceMode {
    Exact,
    MonteCarlo(MonteCarloSettings),
}

/// A draw `u(z) = s sqrt(2/M) sum_m w_m cos(omega_m^T z + b_m)` with
/// `omega_m ~ N(0, diag(1/l^2))`, `b_m ~ U[0, 2 pi)`, `w_m ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorFunction {
    dim: usize,
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    amplitudes: Vec<f64>,
    signal: f64,
}

pub fn sample_prior(kernel: &KernelParams, features: usize, seed: u64) -> Result<PriorFunction> {
    if features == 0 {
        return Err(Error::InvalidParameter("feature count must be >= 1".into()));
    }
    let dim = kernel.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frequencies = Vec::with_capacity(features * dim);
    let mut phases = Vec::with_capacity(features);
    let mut amplitudes = Vec::with_capacity(features);
    for _ in 0..features {
        for l in kernel.lengthscales() {
            let e: f64 = StandardNormal.sample(&mut rng);
            frequencies.push(e / l);
        }
        phases.push(rng.random_range(0.0..2.0 * PI));
        amplitudes.push(StandardNormal.sample(&mut rng));
    }
    Ok(PriorFunction {
        dim,
        frequencies,
        phases,
        amplitudes,
        signal: kernel.signal(),
    })
}

impl PriorFunction {
    pub fn feature_count(&self) -> usize {
        self.phases.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn scale(&self) -> f64 {
        self.signal * (2.0 / self.feature_count() as f64).sqrt()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (m, (&b, &w)) in self.phases.iter().zip(&self.amplitudes).enumerate() {
            let omega = &self.frequencies[m * self.dim..(m + 1) * self.dim];
            acc += w * (dot(omega, z) + b).cos();
        }
        self.scale() * acc
    }

    /// `O[u](z)`, differentiating each cosine feature analytically:
    /// `d^n cos(omega^T z + b) = prod_r omega_r^n_r cos(omega^T z + b + |n| pi/2)`.
    pub fn apply(&self, op: &OperatorSpec, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (m, (&b, &w)) in self.phases.iter().zip(&self.amplitudes).enumerate() {
            let omega = &self.frequencies[m * self.dim..(m + 1) * self.dim];
            let theta = dot(omega, z) + b;
            let (s, c) = theta.sin_cos();
            let shifted = [c, -s, -c, s];
            let mut f = 0.0;
            for term in op.terms() {
                let mut mono = term.coeff;
                for (o, &n) in omega.iter().zip(&term.orders) {
                    mono *= o.powi(n as i32);
                }
                f += mono * shifted[(term.total_order() % 4) as usize];
            }
            acc += w * f;
        }
        self.scale() * acc
    }
}

/// Per-sample combined weights `alpha - beta` for one prior draw.
#[derive(Debug, Clone)]
pub struct SampleWeights {
    pub prior: PriorFunction,
    pub delta: Vec<f64>,
}

/// A cached set of pathwise samples. Holds no reference to the model; pass
/// the model that built it when evaluating.
#[derive(Debug, Clone)]
pub struct PathwiseEnsemble {
    samples: Vec<SampleWeights>,
}

impl PathwiseEnsemble {
    /// One sample per `(prior_seed, noise_seed)` pair.
    pub fn build(
        model: &PosteriorModel,
        seeds: &[(u64, u64)],
        features: usize,
        solver: &SampleSolver,
    ) -> Result<Self> {
        let local_factor;
        let factor = match (solver, &model.factor) {
            (SampleSolver::Direct, Some(f)) => Some(f),
            (SampleSolver::Direct, None) if !model.system.is_empty() => {
                let k = model.system.dense().ok_or(Error::DenseUnavailable)?;
                local_factor = Cholesky::factor(k, model.system.lambda())?;
                Some(&local_factor)
            }
            _ => None,
        };
        let samples = seeds
            .iter()
            .map(|&(prior_seed, noise_seed)| {
                let prior = sample_prior(model.system.kernel(), features, prior_seed)?;
                let delta = sample_delta(model, &prior, noise_seed, solver, factor)?;
                Ok(SampleWeights { prior, delta })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples })
    }

    /// `count` samples with seeds derived from `seed`.
    pub fn with_seed(
        model: &PosteriorModel,
        count: usize,
        seed: u64,
        features: usize,
        solver: &SampleSolver,
    ) -> Result<Self> {
        let seeds: Vec<(u64, u64)> = (0..count as u64)
            .map(|i| (mix(seed, 2 * i), mix(seed, 2 * i + 1)))
            .collect();
        Self::build(model, &seeds, features, solver)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SampleWeights] {
        &self.samples
    }

    /// Every sample's value at `z`; one cross-vector evaluation shared by all.
    pub fn values(&self, model: &PosteriorModel, z: &[f64]) -> Result<Vec<f64>> {
        let a = model.cross(z)?;
        Ok(self
            .samples
            .iter()
            .map(|s| s.prior.eval(z) + dot(&a, &s.delta))
            .collect())
    }

    /// Unbiased sample variance at `z`.
    pub fn variance(&self, model: &PosteriorModel, z: &[f64]) -> Result<f64> {
        if self.samples.len() < 2 {
            return Err(Error::InvalidParameter(
                "variance needs at least two samples".into(),
            ));
        }
        Ok(sample_variance(&self.values(model, z)?))
    }
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

// splitmix64 finalizer over (seed, index).
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_delta(
    model: &PosteriorModel,
    prior: &PriorFunction,
    noise_seed: u64,
    solver: &SampleSolver,
    factor: Option<&Cholesky>,
) -> Result<Vec<f64>> {
    let system = &model.system;
    if system.is_empty() {
        return Ok(Vec::new());
    }
    let lambda = system.lambda();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = Normal::new(0.0, lambda.sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let obs: Vec<f64> = system
        .colset()
        .iter()
        .map(|e| prior.apply(&e.operator, &e.point) + noise.sample(&mut rng))
        .collect();
    let beta = match (solver, factor) {
        (SampleSolver::Direct, Some(f)) => refine(system, f, &obs, f.solve(&obs)),
        (SampleSolver::Direct, None) => return Err(Error::FactorizationUnavailable),
        (SampleSolver::Sdd(cfg), _) => {
            let cfg = SddConfig {
                seed: mix(cfg.seed, noise_seed),
                ..cfg.clone()
            };
            run_sdd(system, &obs, &cfg, &vec![0.0; obs.len()])?
                .weights
                .values
        }
    };
    Ok(model
        .weights
        .values
        .iter()
        .zip(&beta)
        .map(|(a, b)| a - b)
        .collect())
}

/// The conditioned GP `u | PDE` over a Gram system and its weights.
#[derive(Debug)]
pub struct PosteriorModel {
    system: GramSystem,
    weights: RepresenterWeights,
    mode: VarianceMode,
    factor: Option<Cholesky>,
    ensemble: Option<PathwiseEnsemble>,
    clamped: AtomicUsize,
}

impl PosteriorModel {
    /// Builds the model. `Exact` mode factors the dense system (an error if
    /// it is not materialized); `MonteCarlo` mode builds the sample ensemble.
    pub fn new(system: GramSystem, weights: RepresenterWeights, mode: VarianceMode) -> Result<Self> {
        let factor = match (&mode, system.is_empty()) {
            (VarianceMode::Exact, false) => {
                let k = system.dense().ok_or(Error::FactorizationUnavailable)?;
                Some(Cholesky::factor(k, system.lambda())?)
            }
            _ => None,
        };
        Self::assemble(system, weights, mode, factor)
    }

    /// Like `new` but reuses a factor of `K + lambda I` already computed.
    pub fn with_factor(
        system: GramSystem,
        weights: RepresenterWeights,
        mode: VarianceMode,
        factor: Cholesky,
    ) -> Result<Self> {
        if factor.size() != system.len() {
            return Err(Error::DimensionMismatch {
                expected: system.len(),
                got: factor.size(),
            });
        }
        Self::assemble(system, weights, mode, Some(factor))
    }

    fn assemble(
        system: GramSystem,
        weights: RepresenterWeights,
        mode: VarianceMode,
        factor: Option<Cholesky>,
    ) -> Result<Self> {
        if weights.len() != system.len() {
            return Err(Error::DimensionMismatch {
                expected: system.len(),
                got: weights.len(),
            });
        }
        if weights.values.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weights".into()));
        }
        let mut model = Self {
            system,
            weights,
            mode,
            factor,
            ensemble: None,
            clamped: AtomicUsize::new(0),
        };
        if let VarianceMode::MonteCarlo(mc) = &model.mode {
            if mc.samples < 2 {
                return Err(Error::InvalidParameter(
                    "Monte Carlo variance needs at least two samples".into(),
                ));
            }
            let ens =
                PathwiseEnsemble::with_seed(&model, mc.samples, mc.seed, mc.features, &mc.solver)?;
            model.ensemble = Some(ens);
        }
        Ok(model)
    }

    pub fn system(&self) -> &GramSystem {
        &self.system
    }

    pub fn weights(&self) -> &RepresenterWeights {
        &self.weights
    }

    pub fn mode(&self) -> &VarianceMode {
        &self.mode
    }

    pub fn factor(&self) -> Option<&Cholesky> {
        self.factor.as_ref()
    }

    pub fn kernel(&self) -> &KernelParams {
        self.system.kernel()
    }

    /// `A(z)` with the identity query operator.
    pub fn cross(&self, z: &[f64]) -> Result<Vec<f64>> {
        cross_vector(
            self.system.colset(),
            self.system.kernel(),
            z,
            &OperatorSpec::identity(self.system.kernel().dim()),
        )
    }

    /// `A(z)^T alpha`.
    pub fn mean(&self, z: &[f64]) -> Result<f64> {
        Ok(dot(&self.cross(z)?, &self.weights.values))
    }

    /// `k(z,z) - A(z)^T (K + lambda I)^{-1} A(z)`, clamped to `[0, s^2]`.
    pub fn variance_exact(&self, z: &[f64]) -> Result<f64> {
        let prior = self.kernel().variance();
        let a = self.cross(z)?;
        if a.is_empty() {
            return Ok(prior);
        }
        let factor = self.factor.as_ref().ok_or(Error::FactorizationUnavailable)?;
        let v = factor.solve_lower(&a);
        let var = prior - dot(&v, &v);
        if var < 0.0 {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            return Ok(0.0);
        }
        Ok(var.min(prior))
    }

    /// Monte Carlo variance from the model's cached ensemble.
    pub fn variance_mc(&self, z: &[f64]) -> Result<f64> {
        let ens = self
            .ensemble
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("model has no sample ensemble".into()))?;
        Ok(ens.variance(self, z)?.min(self.kernel().variance()))
    }

    /// Variance according to the model's mode.
    pub fn variance(&self, z: &[f64]) -> Result<f64> {
        match self.mode {
            VarianceMode::Exact => self.variance_exact(z),
            VarianceMode::MonteCarlo(_) => self.variance_mc(z),
        }
    }

    /// Number of negative exact variances clamped to zero so far.
    pub fn clamp_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Approximate bytes held by the model's matrices and vectors.
    pub fn memory_bytes(&self) -> usize {
        let n = self.system.len();
        let dense = self.system.dense().map_or(0, |d| d.bytes());
        let factor = self.factor.as_ref().map_or(0, |f| f.bytes());
        dense + factor + 8 * n * (self.system.kernel().dim() + 2)
    }
}

/// A single posterior sample bound to its model.
#[derive(Debug, Clone)]
pub struct PosteriorSample<'m> {
    model: &'m PosteriorModel,
    weights: SampleWeights,
}

impl PosteriorSample<'_> {
    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        let a = self.model.cross(z)?;
        Ok(self.weights.prior.eval(z) + dot(&a, &self.weights.delta))
    }

    pub fn weights(&self) -> &SampleWeights {
        &self.weights
    }
}

/// Conditions the prior draw `prior` on the collocation observations.
pub fn pathwise_sample<'m>(
    model: &'m PosteriorModel,
    prior: PriorFunction,
    noise_seed: u64,
    solver: &SampleSolver,
) -> Result<PosteriorSample<'m>> {
    let local;
    let factor = match (solver, model.factor()) {
        (SampleSolver::Direct, Some(f)) => Some(f),
        (SampleSolver::Direct, None) if !model.system().is_empty() => {
            let k = model.system().dense().ok_or(Error::DenseUnavailable)?;
            local = Cholesky::factor(k, model.system().lambda())?;
            Some(&local)
        }
        _ => None,
    };
    let delta = sample_delta(model, &prior, noise_seed, solver, factor)?;
    Ok(PosteriorSample {
        model,
        weights: SampleWeights { prior, delta },
    })
}

/// Sample variance of `samples` pathwise draws at `z`.
pub fn posterior_variance_mc(
    model: &PosteriorModel,
    samples: usize,
    z: &[f64],
    seed: u64,
    solver: &SampleSolver,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::InvalidParameter(
            "variance needs at least two samples".into(),
        ));
    }
    PathwiseEnsemble::with_seed(model, samples, seed, DEFAULT_FEATURES, solver)?.variance(model, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::gram::{assemble_dense, CollocationEntry, CollocationSet};
    use crate::kernels::kernel_eval;
    use std::sync::Arc;

    fn line_model(lambda: f64) -> PosteriorModel {
        let op = Arc::new(OperatorSpec::identity(1));
        let set = CollocationSet::new(
            vec![],
            vec![
                CollocationEntry::boundary(Point::from([0.0]), 0, op.clone(), 0.0),
                CollocationEntry::boundary(Point::from([1.0]), 1, op, 0.5),
            ],
        )
        .unwrap();
        let k = KernelParams::new(1.0, vec![0.5]).unwrap();
        let sys = assemble_dense(set, k, lambda).unwrap();
        let w = crate::solvers::solve_direct(&sys).unwrap();
        PosteriorModel::new(sys, w, VarianceMode::Exact).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_mean() {
        let m = line_model(1e-8);
        let sys = m.system().clone();
        let zero = PosteriorModel::new(sys, RepresenterWeights::zeros(2), VarianceMode::Exact).unwrap();
        assert_eq!(zero.mean(&[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn unconditioned_variance_is_prior() {
        let k = KernelParams::new(1.5, vec![0.5]).unwrap();
        let sys = assemble_dense(CollocationSet::default(), k, 0.0).unwrap();
        let m = PosteriorModel::new(sys, RepresenterWeights::zeros(0), VarianceMode::Exact).unwrap();
        assert_eq!(m.variance_exact(&[0.2]).unwrap(), 2.25);
    }

    #[test]
    fn interpolation_at_identity_points() {
        let m = line_model(1e-12);
        assert!(m.variance_exact(&[0.0]).unwrap() < 1e-10);
        assert!((m.mean(&[1.0]).unwrap() - 0.5).abs() < 1e-9);
        for i in 0..=20 {
            let v = m.variance_exact(&[i as f64 / 10.0 - 0.5]).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn prior_draw_is_deterministic() {
        let k = KernelParams::new(1.0, vec![0.3, 0.7]).unwrap();
        let a = sample_prior(&k, 64, 11).unwrap();
        let b = sample_prior(&k, 64, 11).unwrap();
        assert_eq!(a.eval(&[0.1, 0.2]), b.eval(&[0.1, 0.2]));
        assert_ne!(a.eval(&[0.1, 0.2]), sample_prior(&k, 64, 12).unwrap().eval(&[0.1, 0.2]));
        assert!(sample_prior(&k, 0, 1).is_err());
    }

    #[test]
    fn prior_apply_identity_and_laplacian() {
        let k = KernelParams::new(1.0, vec![0.3, 0.7]).unwrap();
        let f = sample_prior(&k, 1, 5).unwrap();
        let z = [0.25, -0.4];
        assert_eq!(f.apply(&OperatorSpec::identity(2), &z), f.eval(&z));
        let w2: f64 = f.frequencies.iter().map(|w| w * w).sum();
        let lap = f.apply(&OperatorSpec::neg_laplacian(2), &z);
        assert!((lap - w2 * f.eval(&z)).abs() <= 1e-12 * lap.abs().max(1.0));
    }

    #[test]
    fn prior_covariance_matches_kernel() {
        let k = KernelParams::new(1.0, vec![0.5, 0.5]).unwrap();
        let (p, q) = ([0.1, 0.2], [0.4, -0.1]);
        let draws = 4096;
        let (mut spp, mut sqq, mut spq) = (0.0, 0.0, 0.0);
        for seed in 0..draws {
            let f = sample_prior(&k, 64, seed).unwrap();
            let (a, b) = (f.eval(&p), f.eval(&q));
            spp += a * a;
            sqq += b * b;
            spq += a * b;
        }
        let n = draws as f64;
        let kpq = kernel_eval(&k, &p, &q).unwrap();
        assert!((spq / n - kpq).abs() / kpq < 0.05, "{} vs {kpq}", spq / n);
        assert!((spp / n - 1.0).abs() < 0.05);
        assert!((sqq / n - 1.0).abs() < 0.05);
    }

    #[test]
    fn identical_seeds_give_zero_variance() {
        let m = line_model(1e-8);
        let ens = PathwiseEnsemble::build(&m, &[(3, 4), (3, 4)], 128, &SampleSolver::Direct).unwrap();
        assert_eq!(ens.variance(&m, &[0.4]).unwrap(), 0.0);
    }

    #[test]
    fn mc_variance_deterministic() {
        let m = line_model(1e-8);
        let a = posterior_variance_mc(&m, 8, &[0.4], 9, &SampleSolver::Direct).unwrap();
        let b = posterior_variance_mc(&m, 8, &[0.4], 9, &SampleSolver::Direct).unwrap();
        assert_eq!(a, b);
        assert!(posterior_variance_mc(&m, 1, &[0.4], 9, &SampleSolver::Direct).is_err());
    }

    #[test]
    fn samples_interpolate_constraints() {
        let m = line_model(1e-12);
        for seed in 0..5 {
            let prior = sample_prior(m.kernel(), 256, seed).unwrap();
            let s = pathwise_sample(&m, prior, seed + 100, &SampleSolver::Direct).unwrap();
            assert!(s.eval(&[0.0]).unwrap().abs() < 1e-4);
            assert!((s.eval(&[1.0]).unwrap() - 0.5).abs() < 1e-4);
        }
    }
}
