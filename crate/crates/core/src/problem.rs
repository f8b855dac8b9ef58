//! Linear PDE problems `L u = s` in the domain, `B_c u = b_c` on each face.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::gram::{CollocationEntry, CollocationSet};
use crate::kernels::OperatorSpec;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct BoundaryCondition {
    pub operator: Arc<OperatorSpec>,
    pub value: ScalarField,
}

impl BoundaryCondition {
    pub fn new(operator: OperatorSpec, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            operator: Arc::new(operator),
            value: Arc::new(value),
        }
    }

    /// `u = value` on the face.
    pub fn dirichlet(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(OperatorSpec::identity(dim), value)
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    pub pde_operator: Arc<OperatorSpec>,
    pub source: ScalarField,
    /// Indexed by face id.
    pub boundary_conditions: Vec<BoundaryCondition>,
    pub ground_truth: Option<ScalarField>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain.kind())
            .field("pde_operator", &self.pde_operator)
            .field("faces", &self.boundary_conditions.len())
            .field("ground_truth", &self.ground_truth.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        pde_operator: OperatorSpec,
        source: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        boundary_conditions: Vec<BoundaryCondition>,
        ground_truth: Option<ScalarField>,
    ) -> Result<Self> {
        let dim = domain.dim();
        if pde_operator.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: pde_operator.dim(),
            });
        }
        if boundary_conditions.len() != domain.faces().len() {
            return Err(Error::InvalidParameter(format!(
                "{} boundary conditions for {} faces",
                boundary_conditions.len(),
                domain.faces().len()
            )));
        }
        if let Some(bc) = boundary_conditions.iter().find(|bc| bc.operator.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bc.operator.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            domain,
            pde_operator: Arc::new(pde_operator),
            source: Arc::new(source),
            boundary_conditions,
            ground_truth,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn interior_entry(&self, point: Point) -> CollocationEntry {
        let target = (self.source)(&point);
        CollocationEntry::interior(point, self.pde_operator.clone(), target)
    }

    pub fn boundary_entry(&self, point: Point, face: usize) -> CollocationEntry {
        let bc = &self.boundary_conditions[face];
        let target = (bc.value)(&point);
        CollocationEntry::boundary(point, face, bc.operator.clone(), target)
    }

    /// Sobol-generated collocation set with `n_interior` + `n_boundary` points.
    pub fn initial_set(&self, n_interior: usize, n_boundary: usize, skip: u64) -> Result<CollocationSet> {
        let interior = self
            .domain
            .sample_interior(n_interior, skip)?
            .into_iter()
            .map(|p| self.interior_entry(p))
            .collect();
        let boundary = self
            .domain
            .sample_boundary(n_boundary, skip)?
            .into_iter()
            .map(|(p, f)| self.boundary_entry(p, f))
            .collect();
        CollocationSet::new(interior, boundary)
    }

    pub fn truth(&self, z: &[f64]) -> Option<f64> {
        self.ground_truth.as_ref().map(|f| f(z))
    }
}
