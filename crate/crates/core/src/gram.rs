//! Collocation sets and the operator-applied kernel Gram system.
//!
//! Entries are ordered interior first, then boundary, so the Gram matrix has
//! the block layout `[[LL'k, LB'k], [(LB'k)^T, BB'k]]` and the right-hand side
//! is `(s(Z_int); b(Z_bnd))`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, Point};
use crate::kernels::{apply_both_unchecked, KernelParams, OperatorSpec, PairTables};
use crate::linalg::{dot, DenseMatrix};

/// Points closer than this with identical operators are rejected.
pub const DUPLICATE_TOL: f64 = 1e-10;
/// Largest system assembled densely by default.
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Default regularizer `1e-8 * s^4`.
pub fn default_lambda(kernel: &KernelParams) -> f64 {
    1e-8 * kernel.variance() * kernel.variance()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationEntry {
    pub point: Point,
    pub operator: Arc<OperatorSpec>,
    pub target: f64,
    /// Boundary face id; `None` for interior entries.
    pub face: Option<usize>,
}

impl CollocationEntry {
    pub fn interior(point: Point, operator: Arc<OperatorSpec>, target: f64) -> Self {
        Self {
            point,
            operator,
            target,
            face: None,
        }
    }

    pub fn boundary(point: Point, face: usize, operator: Arc<OperatorSpec>, target: f64) -> Self {
        Self {
            point,
            operator,
            target,
            face: Some(face),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CollocationSet {
    interior: Vec<CollocationEntry>,
    boundary: Vec<CollocationEntry>,
}

impl CollocationSet {
    /// Validates dimensions and rejects duplicated (point, operator) pairs.
    /// An empty set is allowed and represents the unconditioned prior.
    pub fn new(interior: Vec<CollocationEntry>, boundary: Vec<CollocationEntry>) -> Result<Self> {
        let set = Self { interior, boundary };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        let Some(first) = self.iter().next() else {
            return Ok(());
        };
        let dim = first.point.dim();
        for e in self.iter() {
            if e.point.dim() != dim || e.operator.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: if e.point.dim() != dim {
                        e.point.dim()
                    } else {
                        e.operator.dim()
                    },
                });
            }
            if !e.point.iter().all(|x| x.is_finite()) || !e.target.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite collocation entry at {}",
                    e.point
                )));
            }
        }
        // Sweep along the first coordinate; only neighbours within the
        // tolerance band need a full distance check.
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.entry(a).point[0]
                .partial_cmp(&self.entry(b).point[0])
                .unwrap()
        });
        let tol2 = DUPLICATE_TOL * DUPLICATE_TOL;
        for (k, &a) in order.iter().enumerate() {
            let ea = self.entry(a);
            for &b in &order[k + 1..] {
                let eb = self.entry(b);
                if eb.point[0] - ea.point[0] > DUPLICATE_TOL {
                    break;
                }
                if squared_distance(&ea.point, &eb.point) <= tol2
                    && (Arc::ptr_eq(&ea.operator, &eb.operator) || ea.operator == eb.operator)
                {
                    return Err(Error::DuplicatePoint {
                        first: a.min(b),
                        second: a.max(b),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn interior(&self) -> &[CollocationEntry] {
        &self.interior
    }

    pub fn boundary(&self) -> &[CollocationEntry] {
        &self.boundary
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn len(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> Option<usize> {
        self.iter().next().map(|e| e.point.dim())
    }

    /// Entry `i` in Gram order (interior first).
    pub fn entry(&self, i: usize) -> &CollocationEntry {
        if i < self.interior.len() {
            &self.interior[i]
        } else {
            &self.boundary[i - self.interior.len()]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &CollocationEntry> {
        self.interior.iter().chain(self.boundary.iter())
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.iter().map(|e| &e.point)
    }

    /// A new set containing `self` plus the given entries (nested refinement).
    pub fn extended(
        &self,
        interior: impl IntoIterator<Item = CollocationEntry>,
        boundary: impl IntoIterator<Item = CollocationEntry>,
    ) -> Result<Self> {
        let mut next = self.clone();
        next.interior.extend(interior);
        next.boundary.extend(boundary);
        next.validate()?;
        Ok(next)
    }

    /// Maps Gram-order weights of `self` into the layout of `larger`, which
    /// must extend `self`; new coordinates are zero.
    pub fn embed_weights(&self, larger: &CollocationSet, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.len());
        assert!(larger.n_interior() >= self.n_interior());
        assert!(larger.n_boundary() >= self.n_boundary());
        let mut out = vec![0.0; larger.len()];
        let ni = self.n_interior();
        out[..ni].copy_from_slice(&weights[..ni]);
        let off = larger.n_interior();
        out[off..off + self.n_boundary()].copy_from_slice(&weights[ni..]);
        out
    }
}

/// `g(Z_col)`: interior targets followed by boundary targets.
pub fn rhs_vector(colset: &CollocationSet) -> Vec<f64> {
    colset.iter().map(|e| e.target).collect()
}

/// `A(z)_i = O_query O_i k(z, z_i)`. With the identity query operator this is
/// the cross-covariance between `u(z)` and the collocation observations.
pub fn cross_vector(
    colset: &CollocationSet,
    kernel: &KernelParams,
    z: &[f64],
    query_op: &OperatorSpec,
) -> Result<Vec<f64>> {
    if z.len() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: z.len(),
        });
    }
    if query_op.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.dim(),
            got: query_op.dim(),
        });
    }
    if let Some(d) = colset.dim() {
        if d != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: d,
            });
        }
    }
    Ok(colset
        .iter()
        .map(|e| apply_both_unchecked(query_op, &e.operator, kernel, z, &e.point))
        .collect())
}

/// The regularized system `(K + lambda I) alpha = g`.
///
/// Immutable after construction. Holds flattened coordinates for fast
/// matrix-free row evaluation and, optionally, the dense `K` (without the
/// `lambda` shift).
#[derive(Debug, Clone)]
pub struct GramSystem {
    colset: CollocationSet,
    kernel: KernelParams,
    lambda: f64,
    dense: Option<DenseMatrix>,
    coords: Vec<f64>,
    ops: Vec<Arc<OperatorSpec>>,
    op_of: Vec<usize>,
    rhs: Vec<f64>,
}

impl GramSystem {
    /// A system without the dense matrix; rows are computed on demand.
    pub fn matrix_free(colset: CollocationSet, kernel: KernelParams, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be non-negative, got {lambda}"
            )));
        }
        if let Some(d) = colset.dim() {
            if d != kernel.dim() {
                return Err(Error::DimensionMismatch {
                    expected: kernel.dim(),
                    got: d,
                });
            }
        }
        let dim = kernel.dim();
        let mut coords = Vec::with_capacity(colset.len() * dim);
        let mut ops: Vec<Arc<OperatorSpec>> = Vec::new();
        let mut op_of = Vec::with_capacity(colset.len());
        for e in colset.iter() {
            coords.extend_from_slice(&e.point);
            let idx = match ops
                .iter()
                .position(|o| Arc::ptr_eq(o, &e.operator) || **o == *e.operator)
            {
                Some(i) => i,
                None => {
                    ops.push(e.operator.clone());
                    ops.len() - 1
                }
            };
            op_of.push(idx);
        }
        let rhs = rhs_vector(&colset);
        Ok(Self {
            colset,
            kernel,
            lambda,
            dense: None,
            coords,
            ops,
            op_of,
            rhs,
        })
    }

    pub fn colset(&self) -> &CollocationSet {
        &self.colset
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.colset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colset.is_empty()
    }

    pub fn dense(&self) -> Option<&DenseMatrix> {
        self.dense.as_ref()
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    #[inline]
    fn point(&self, i: usize) -> &[f64] {
        let d = self.kernel.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    #[inline]
    fn op(&self, i: usize) -> &OperatorSpec {
        &self.ops[self.op_of[i]]
    }

    /// `K_ij` (unshifted) computed from the kernel.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (oi, oj) = (self.op(i), self.op(j));
        let max_total = (oi.max_order() + oj.max_order()) as usize;
        PairTables::new(&self.kernel, self.point(i), self.point(j), max_total).eval(oi, oj)
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Row `K_j + lambda e_j`, read from the dense matrix when present.
    pub fn gram_row(&self, j: usize) -> Result<Vec<f64>> {
        self.check_index(j)?;
        let mut row = match &self.dense {
            Some(k) => k.row(j).to_vec(),
            None => (0..self.len()).map(|i| self.entry(j, i)).collect(),
        };
        row[j] += self.lambda;
        Ok(row)
    }

    /// `(K_j + lambda e_j)^T x` in O(N) without materializing the row.
    #[inline]
    pub fn row_dot(&self, j: usize, x: &[f64]) -> f64 {
        let base = match &self.dense {
            Some(k) => dot(k.row(j), x),
            None => (0..self.len()).map(|i| self.entry(j, i) * x[i]).sum(),
        };
        base + self.lambda * x[j]
    }

    /// `(K + lambda I) x`; O(N^2).
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|j| self.row_dot(j, x)).collect()
    }

    /// `K x` without the regularizer; O(N^2).
    pub fn kernel_matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.row_dot(j, x) - self.lambda * x[j])
            .collect()
    }

    /// `trace(K + lambda I)`.
    pub fn trace(&self) -> f64 {
        (0..self.len()).map(|i| self.entry(i, i)).sum::<f64>() + self.lambda * self.len() as f64
    }
}

/// Assembles the dense Gram system, capped at `DEFAULT_DENSE_CAP` points.
pub fn assemble_dense(
    colset: CollocationSet,
    kernel: KernelParams,
    lambda: f64,
) -> Result<GramSystem> {
    assemble_dense_with_cap(colset, kernel, lambda, DEFAULT_DENSE_CAP)
}

pub fn assemble_dense_with_cap(
    colset: CollocationSet,
    kernel: KernelParams,
    lambda: f64,
    cap: usize,
) -> Result<GramSystem> {
    if colset.len() > cap {
        return Err(Error::DenseCapExceeded {
            n: colset.len(),
            cap,
        });
    }
    let mut system = GramSystem::matrix_free(colset, kernel, lambda)?;
    let n = system.len();
    let mut k = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = system.entry(i, j);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    system.dense = Some(k);
    Ok(system)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::kernels::kernel_eval;

    fn id2() -> Arc<OperatorSpec> {
        Arc::new(OperatorSpec::identity(2))
    }

    fn disk_set(ni: usize, nb: usize) -> CollocationSet {
        let d = Domain::unit_disk();
        let lap = Arc::new(OperatorSpec::neg_laplacian(2));
        let id = id2();
        let int = d
            .sample_interior(ni, 0)
            .unwrap()
            .into_iter()
            .map(|p| CollocationEntry::interior(p, lap.clone(), 1.0))
            .collect();
        let bnd = d
            .sample_boundary(nb, 0)
            .unwrap()
            .into_iter()
            .map(|(p, f)| CollocationEntry::boundary(p, f, id.clone(), 0.0))
            .collect();
        CollocationSet::new(int, bnd).unwrap()
    }

    #[test]
    fn single_identity_point() {
        let op = Arc::new(OperatorSpec::identity(1));
        let set = CollocationSet::new(
            vec![CollocationEntry::interior(Point::from([0.3]), op, 2.0)],
            vec![],
        )
        .unwrap();
        let k = KernelParams::new(1.0, vec![1.0]).unwrap();
        let sys = assemble_dense(set, k, 0.0).unwrap();
        assert_eq!(sys.dense().unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn duplicate_rejected() {
        let e = CollocationEntry::interior(Point::from([0.2, 0.2]), id2(), 0.0);
        let err = CollocationSet::new(vec![e.clone(), e], vec![]).unwrap_err();
        assert_eq!(err, Error::DuplicatePoint { first: 0, second: 1 });
        // Same point, different operator is a legitimate pair of observations.
        let a = CollocationEntry::interior(Point::from([0.2, 0.2]), id2(), 0.0);
        let b = CollocationEntry::interior(
            Point::from([0.2, 0.2]),
            Arc::new(OperatorSpec::neg_laplacian(2)),
            1.0,
        );
        assert!(CollocationSet::new(vec![a, b], vec![]).is_ok());
    }

    #[test]
    fn rhs_layout() {
        let set = disk_set(3, 2);
        assert_eq!(rhs_vector(&set), vec![1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn rows_agree_and_lambda_on_diagonal() {
        let k = KernelParams::isotropic(1.0, 0.5, 2).unwrap();
        let dense = assemble_dense(disk_set(30, 10), k.clone(), 0.1).unwrap();
        let free = GramSystem::matrix_free(disk_set(30, 10), k.clone(), 0.1).unwrap();
        let unreg = GramSystem::matrix_free(disk_set(30, 10), k, 0.0).unwrap();
        for j in 0..dense.len() {
            let a = dense.gram_row(j).unwrap();
            let b = free.gram_row(j).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
            let c = unreg.gram_row(j).unwrap();
            assert!((b[j] - c[j] - 0.1).abs() < 1e-12);
        }
        assert!(dense.gram_row(40).is_err());
        assert!(dense.dense().unwrap().asymmetry() <= 1e-10);
    }

    #[test]
    fn cross_vector_at_boundary_point() {
        let set = disk_set(4, 3);
        let k = KernelParams::isotropic(1.3, 0.5, 2).unwrap();
        let z = set.boundary()[1].point.clone();
        let a = cross_vector(&set, &k, &z, &OperatorSpec::identity(2)).unwrap();
        assert!((a[5] - 1.69).abs() < 1e-14);
        for (i, e) in set.iter().enumerate() {
            let direct = crate::kernels::apply_op_both(
                &OperatorSpec::identity(2),
                &e.operator,
                &k,
                &z,
                &e.point,
            )
            .unwrap();
            assert_eq!(a[i], direct);
        }
        assert_eq!(a[4], kernel_eval(&k, &z, &set.boundary()[0].point).unwrap());
    }

    #[test]
    fn dense_cap() {
        let k = KernelParams::isotropic(1.0, 0.5, 2).unwrap();
        let err = assemble_dense_with_cap(disk_set(5, 5), k, 0.0, 8).unwrap_err();
        assert_eq!(err, Error::DenseCapExceeded { n: 10, cap: 8 });
    }

    #[test]
    fn embed_weights_keeps_blocks() {
        let small = disk_set(2, 2);
        let big = disk_set(3, 3);
        let w = small.embed_weights(&big, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(w, vec![1.0, 2.0, 0.0, 3.0, 4.0, 0.0]);
    }
}
