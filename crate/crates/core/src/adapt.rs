//! Clustering-based active learning of collocation points.
//!
//! Each iteration draws a Sobol candidate pool, drops candidates within the
//! exclusion radius of existing points, ranks the rest by posterior variance,
//! keeps the top fraction, clusters the kept set with K-means and adds the
//! member nearest each centroid. The enlarged set is re-solved (SDD
//! warm-started from the previous weights) before the next iteration.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, Domain, Membership, Point};
use crate::gram::{assemble_dense_with_cap, CollocationSet, GramSystem, DEFAULT_DENSE_CAP};
use crate::kernels::KernelParams;
use crate::metrics::relative_mse;
use crate::posterior::{MonteCarloSettings, PosteriorModel, SampleSolver, VarianceMode, DEFAULT_FEATURES};
use crate::problem::ProblemSpec;
use crate::solvers::{run_sdd, solve_direct_with_factor, SddConfig};

// Sobol skip offsets. Initial sets live below POOL_SKIP_BASE, pools below
// PROBE_SKIP, and the probe and evaluation grids above.
const POOL_SKIP_BASE: u64 = 1 << 16;
const POOL_STREAMS: u64 = 256;
pub const PROBE_SKIP: u64 = 1 << 30;
pub const EVAL_SKIP: u64 = 1 << 31;

#[derive(Debug, Clone, PartialEq)]
pub struct ALConfig {
    pub pool_size: usize,
    pub exclusion_radius: f64,
    pub retain_fraction: f64,
    pub cluster_count: usize,
    /// Share of each pool drawn on the boundary.
    pub boundary_fraction: f64,
    pub max_iterations: usize,
    /// Stop once the probe-grid mean variance is at or below this value.
    pub stop_tolerance: f64,
    pub seed: u64,
    pub probe_size: usize,
    pub eval_size: usize,
    pub kmeans_max_iters: usize,
    /// Radius halvings tried when filtering empties the pool.
    pub max_radius_halvings: usize,
    pub dense_cap: usize,
    /// Pathwise samples for the variance when the system exceeds `dense_cap`.
    pub mc_samples: usize,
    /// Total point budget; the last batch is truncated to fit.
    pub max_points: Option<usize>,
}

impl Default for ALConfig {
    fn default() -> Self {
        Self {
            pool_size: 1000,
            exclusion_radius: 0.05,
            retain_fraction: 0.2,
            cluster_count: 5,
            boundary_fraction: 0.2,
            max_iterations: 10,
            stop_tolerance: 0.0,
            seed: 0,
            probe_size: 512,
            eval_size: 2000,
            kmeans_max_iters: 100,
            max_radius_halvings: 8,
            dense_cap: DEFAULT_DENSE_CAP,
            mc_samples: 64,
            max_points: None,
        }
    }
}

impl ALConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.cluster_count == 0 {
            return bad("cluster_count must be >= 1".into());
        }
        if !(self.retain_fraction > 0.0 && self.retain_fraction <= 1.0) {
            return bad(format!("retain_fraction {} not in (0, 1]", self.retain_fraction));
        }
        if self.retain_fraction * (self.pool_size as f64) < 5.0 * self.cluster_count as f64 {
            return bad(format!(
                "retain_fraction * pool_size = {} must be at least 5 * cluster_count = {}",
                self.retain_fraction * self.pool_size as f64,
                5 * self.cluster_count
            ));
        }
        if !(0.0..=1.0).contains(&self.boundary_fraction) {
            return bad(format!("boundary_fraction {} not in [0, 1]", self.boundary_fraction));
        }
        if !(self.exclusion_radius >= 0.0 && self.exclusion_radius.is_finite()) {
            return bad(format!("exclusion_radius {} must be >= 0", self.exclusion_radius));
        }
        if self.stop_tolerance.is_nan() || self.stop_tolerance < 0.0 {
            return bad(format!("stop_tolerance {} must be >= 0", self.stop_tolerance));
        }
        if self.probe_size == 0 {
            return bad("probe_size must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Interior,
    Boundary { face: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub point: Point,
    pub location: Location,
}

/// Sobol candidates: `round(boundary_fraction * n_p)` on the boundary, the rest
/// inside. Each `seed_offset` selects its own stretch of the sequence.
pub fn build_pool(
    domain: &Domain,
    n_p: usize,
    boundary_fraction: f64,
    seed_offset: u64,
) -> Result<Vec<Candidate>> {
    if n_p == 0 {
        return Err(Error::InvalidParameter("pool size must be >= 1".into()));
    }
    let n_b = ((n_p as f64) * boundary_fraction).round() as usize;
    let n_i = n_p - n_b;
    // Disk rejection consumes about 4/pi raw indices per interior point.
    let stride = 2 * n_p as u64;
    let span = PROBE_SKIP - POOL_SKIP_BASE - stride;
    let skip = POOL_SKIP_BASE + (seed_offset.wrapping_mul(stride)) % span;
    let mut pool: Vec<Candidate> = domain
        .sample_interior(n_i, skip)?
        .into_iter()
        .map(|point| Candidate {
            point,
            location: Location::Interior,
        })
        .collect();
    pool.extend(
        domain
            .sample_boundary(n_b, skip)?
            .into_iter()
            .map(|(point, face)| Candidate {
                point,
                location: Location::Boundary { face },
            }),
    );
    Ok(pool)
}

/// Candidates at distance `>= r_excl` from every existing collocation point.
pub fn filter_pool(
    pool: &[Candidate],
    existing: &CollocationSet,
    r_excl: f64,
) -> Result<Vec<Candidate>> {
    let r2 = r_excl * r_excl;
    let kept: Vec<Candidate> = pool
        .iter()
        .filter(|c| existing.points().all(|p| squared_distance(&c.point, p) >= r2))
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::PoolExhausted);
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub candidate: Candidate,
    pub acquisition: f64,
}

/// Top `ceil(f_ret * |filtered|)` candidates by posterior variance,
/// descending; ties keep candidate order.
pub fn rank_and_retain(
    filtered: &[Candidate],
    model: &PosteriorModel,
    f_ret: f64,
) -> Result<Vec<Ranked>> {
    if filtered.is_empty() {
        return Err(Error::PoolExhausted);
    }
    let mut ranked = filtered
        .iter()
        .map(|c| {
            Ok(Ranked {
                candidate: c.clone(),
                acquisition: model.variance(&c.point)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // Stable sort, so equal scores stay in index order.
    ranked.sort_by(|a, b| b.acquisition.total_cmp(&a.acquisition));
    let keep = ((f_ret * filtered.len() as f64).ceil() as usize).clamp(1, filtered.len());
    ranked.truncate(keep);
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the clustered point list.
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub clusters: Vec<Cluster>,
    /// Within-cluster sum of squares after each Lloyd update.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = squared_distance(p, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm from k-means++ seeding. `n_c` is reduced to the number
/// of points when larger. Empty clusters are reseeded with the point farthest
/// from its centroid.
pub fn kmeans(points: &[Point], n_c: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    if points.is_empty() || n_c == 0 {
        return Err(Error::InvalidParameter(
            "k-means needs at least one point and one cluster".into(),
        ));
    }
    let k = n_c.min(points.len());
    let dim = points[0].dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids: Vec<Vec<f64>> = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut idx = d2.iter().rposition(|&d| d > 0.0).unwrap();
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && u < d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            // All remaining points coincide with a centroid.
            centroids.len()
        };
        centroids.push(points[pick].to_vec());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, centroids.last().unwrap()));
        }
    }

    let mut assign: Vec<usize> = vec![usize::MAX; points.len()];
    let mut wcss_history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        iterations += 1;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(&centroids, p);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        // Reseed empty clusters.
        let mut counts = vec![0usize; k];
        for &a in &assign {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| counts[assign[i]] > 1)
                .max_by(|&a, &b| {
                    let da = squared_distance(&points[a], &centroids[assign[a]]);
                    let db = squared_distance(&points[b], &centroids[assign[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("k <= number of points");
            counts[assign[far]] -= 1;
            assign[far] = c;
            counts[c] = 1;
            changed = true;
        }
        // Update step.
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &a) in points.iter().zip(&assign) {
            for (s, x) in sums[a].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for (c, s) in sums.into_iter().enumerate() {
            centroids[c] = s.into_iter().map(|x| x / counts[c] as f64).collect();
        }
        let wcss = points
            .iter()
            .zip(&assign)
            .map(|(p, &a)| squared_distance(p, &centroids[a]))
            .sum();
        wcss_history.push(wcss);
        if !changed {
            break;
        }
    }

    let mut clusters: Vec<Cluster> = centroids
        .into_iter()
        .map(|centroid| Cluster {
            members: Vec::new(),
            centroid,
        })
        .collect();
    for (i, &a) in assign.iter().enumerate() {
        clusters[a].members.push(i);
    }
    Ok(KMeans {
        clusters,
        wcss_history,
        iterations,
    })
}

/// For each cluster, the member closest to its centroid (lowest index on ties).
pub fn select_representatives(points: &[Point], clusters: &[Cluster]) -> Vec<usize> {
    clusters
        .iter()
        .filter(|c| !c.members.is_empty())
        .map(|c| {
            let mut best = (c.members[0], f64::INFINITY);
            for &m in &c.members {
                let d = squared_distance(&points[m], &c.centroid);
                if d < best.1 || (d == best.1 && m < best.0) {
                    best = (m, d);
                }
            }
            best.0
        })
        .collect()
}

/// How representer weights are computed inside the loop.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSolver {
    Direct,
    Sdd(SddConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopStatus {
    MaxIterations,
    Converged,
    BudgetReached,
    PoolExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub n_total: usize,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub mean_variance: f64,
    pub max_acquisition: f64,
    pub rel_mse: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ALHistory {
    /// Probe-grid mean variance of the initial model.
    pub initial_mean_variance: f64,
    pub initial_rel_mse: Option<f64>,
    pub initial_wall_seconds: f64,
    pub records: Vec<IterationRecord>,
    pub status: StopStatus,
}

/// Fixed probe grid for the stopping statistic.
pub fn probe_grid(domain: &Domain, size: usize) -> Result<Vec<Point>> {
    domain.sample_interior(size, PROBE_SKIP)
}

/// Interior evaluation grid for error metrics.
pub fn evaluation_grid(domain: &Domain, size: usize) -> Result<Vec<Point>> {
    domain.sample_interior(size, EVAL_SKIP)
}

pub fn mean_variance(model: &PosteriorModel, grid: &[Point]) -> Result<f64> {
    let total = grid
        .iter()
        .map(|p| model.variance(p))
        .sum::<Result<f64>>()?;
    Ok(total / grid.len() as f64)
}

/// Relative MSE (percent) of the posterior mean against the problem's ground truth.
pub fn model_rel_mse(model: &PosteriorModel, problem: &ProblemSpec, grid: &[Point]) -> Result<Option<f64>> {
    let Some(truth) = &problem.ground_truth else {
        return Ok(None);
    };
    let pred = grid.iter().map(|p| model.mean(p)).collect::<Result<Vec<_>>>()?;
    let exact: Vec<f64> = grid.iter().map(|p| truth(p)).collect();
    relative_mse(&pred, &exact).map(Some)
}

/// Solves for weights on `colset` and wraps them in a posterior model.
/// Dense systems use exact variance; larger ones are matrix-free with
/// Monte Carlo variance from SDD-solved pathwise samples.
pub fn fit(
    colset: CollocationSet,
    kernel: &KernelParams,
    lambda: f64,
    solver: &WeightSolver,
    warm_start: Option<&[f64]>,
    al: &ALConfig,
) -> Result<PosteriorModel> {
    if colset.len() <= al.dense_cap {
        let system = assemble_dense_with_cap(colset, kernel.clone(), lambda, al.dense_cap)?;
        match solver {
            WeightSolver::Direct => {
                let (w, factor) = solve_direct_with_factor(&system)?;
                PosteriorModel::with_factor(system, w, VarianceMode::Exact, factor)
            }
            WeightSolver::Sdd(cfg) => {
                let init = warm_start.map_or_else(|| vec![0.0; system.len()], <[f64]>::to_vec);
                let run = run_sdd(&system, system.rhs(), cfg, &init)?;
                PosteriorModel::new(system, run.weights, VarianceMode::Exact)
            }
        }
    } else {
        let system = GramSystem::matrix_free(colset, kernel.clone(), lambda)?;
        let cfg = match solver {
            WeightSolver::Sdd(cfg) => cfg.clone(),
            WeightSolver::Direct => return Err(Error::DenseUnavailable),
        };
        let init = warm_start.map_or_else(|| vec![0.0; system.len()], <[f64]>::to_vec);
        let run = run_sdd(&system, system.rhs(), &cfg, &init)?;
        let mc = MonteCarloSettings {
            samples: al.mc_samples,
            seed: al.seed,
            features: DEFAULT_FEATURES,
            solver: SampleSolver::Sdd(cfg),
        };
        PosteriorModel::new(system, run.weights, VarianceMode::MonteCarlo(mc))
    }
}

fn mix(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ i.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Runs the h-adaptive refinement loop from `initial`.
pub fn active_learning_loop(
    problem: &ProblemSpec,
    initial: CollocationSet,
    kernel: &KernelParams,
    lambda: f64,
    al: &ALConfig,
    solver: &WeightSolver,
) -> Result<(PosteriorModel, ALHistory)> {
    al.validate()?;
    if initial.n_interior() == 0 || initial.n_boundary() == 0 {
        return Err(Error::InvalidParameter(
            "initial set needs at least one interior and one boundary point".into(),
        ));
    }
    let domain = &problem.domain;
    let probe = probe_grid(domain, al.probe_size)?;
    let eval = evaluation_grid(domain, al.eval_size.max(1))?;

    let start = Instant::now();
    let mut model = fit(initial, kernel, lambda, solver, None, al)?;
    let mut history = ALHistory {
        initial_mean_variance: mean_variance(&model, &probe)?,
        initial_rel_mse: model_rel_mse(&model, problem, &eval)?,
        initial_wall_seconds: start.elapsed().as_secs_f64(),
        records: Vec::new(),
        status: StopStatus::MaxIterations,
    };

    for it in 0..al.max_iterations {
        let start = Instant::now();
        let colset = model.system().colset();
        if al.max_points.is_some_and(|cap| colset.len() >= cap) {
            history.status = StopStatus::BudgetReached;
            break;
        }
        let stream = (al.seed % POOL_STREAMS) * (al.max_iterations as u64) + it as u64;
        let pool = build_pool(domain, al.pool_size, al.boundary_fraction, stream)?;

        let mut radius = al.exclusion_radius;
        let mut filtered = filter_pool(&pool, colset, radius);
        let mut halvings = 0;
        while matches!(filtered, Err(Error::PoolExhausted)) && halvings < al.max_radius_halvings {
            radius *= 0.5;
            halvings += 1;
            filtered = filter_pool(&pool, colset, radius);
        }
        let filtered = match filtered {
            Ok(f) => f,
            Err(Error::PoolExhausted) => {
                history.status = StopStatus::PoolExhausted;
                break;
            }
            Err(e) => return Err(e),
        };

        let retained = rank_and_retain(&filtered, &model, al.retain_fraction)?;
        let max_acquisition = retained[0].acquisition;
        let points: Vec<Point> = retained.iter().map(|r| r.candidate.point.clone()).collect();
        let clusters = kmeans(&points, al.cluster_count, mix(al.seed, it as u64), al.kmeans_max_iters)?;
        let mut reps = select_representatives(&points, &clusters.clusters);
        if let Some(cap) = al.max_points {
            // Keep the highest-ranked representatives.
            reps.sort_unstable();
            reps.truncate(cap.saturating_sub(colset.len()));
        }

        let mut new_interior = Vec::new();
        let mut new_boundary = Vec::new();
        for &i in &reps {
            let cand = &retained[i].candidate;
            match cand.location {
                Location::Interior => {
                    debug_assert_eq!(domain.contains(&cand.point)?, Membership::Interior);
                    new_interior.push(problem.interior_entry(cand.point.clone()));
                }
                Location::Boundary { face } => {
                    new_boundary.push(problem.boundary_entry(cand.point.clone(), face));
                }
            }
        }
        let next = colset.extended(new_interior, new_boundary)?;
        let warm = colset.embed_weights(&next, &model.weights().values);
        let solver_it = match solver {
            WeightSolver::Sdd(cfg) => WeightSolver::Sdd(SddConfig {
                seed: cfg.seed.wrapping_add(it as u64 + 1),
                ..cfg.clone()
            }),
            WeightSolver::Direct => WeightSolver::Direct,
        };
        model = fit(next, kernel, lambda, &solver_it, Some(&warm), al)?;

        let mean_var = mean_variance(&model, &probe)?;
        let colset = model.system().colset();
        history.records.push(IterationRecord {
            iteration: it + 1,
            n_total: colset.len(),
            n_interior: colset.n_interior(),
            n_boundary: colset.n_boundary(),
            mean_variance: mean_var,
            max_acquisition,
            rel_mse: model_rel_mse(&model, problem, &eval)?,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if mean_var <= al.stop_tolerance {
            history.status = StopStatus::Converged;
            break;
        }
        if al.max_points.is_some_and(|cap| colset.len() >= cap) {
            history.status = StopStatus::BudgetReached;
            break;
        }
    }
    Ok((model, history))
}
