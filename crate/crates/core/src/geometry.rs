//! Computational domains, membership tests, and quasi-random interior and
//! boundary sampling.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::sobol::Sobol;

/// Tolerance used for boundary membership.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// A location in the (space or space-time) domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        squared_distance(&self.0, other).sqrt()
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl<const D: usize> From<[f64; D]> for Point {
    fn from(v: [f64; D]) -> Self {
        Self(v.to_vec())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    /// `{x : |x|^2 <= 1}` in two dimensions.
    UnitDisk2D,
    /// `[0,1]^3`.
    UnitCube3D,
    /// `[0,1]_x x [0,1]_t`, coordinates ordered `(x, t)`.
    SpaceTimeRect1Dx1T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceGeometry {
    /// The unit circle, parametrized by angle `2*pi*u`.
    Circle,
    /// The hyperplane `coords[axis] == value` restricted to the unit box.
    Plane { axis: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub id: usize,
    pub geometry: FaceGeometry,
    dim: usize,
}

impl BoundaryFace {
    /// Dimension of the face's parameter space.
    pub fn param_dims(&self) -> usize {
        self.dim - 1
    }

    /// Surface measure (length or area) of the face.
    pub fn measure(&self) -> f64 {
        match self.geometry {
            FaceGeometry::Circle => 2.0 * PI,
            FaceGeometry::Plane { .. } => 1.0,
        }
    }

    /// Maps a parameter in `[0,1)^(dim-1)` onto the face.
    pub fn map(&self, u: &[f64]) -> Point {
        debug_assert_eq!(u.len(), self.param_dims());
        match self.geometry {
            FaceGeometry::Circle => {
                let theta = 2.0 * PI * u[0];
                Point::new(vec![theta.cos(), theta.sin()])
            }
            FaceGeometry::Plane { axis, value } => {
                let mut coords = Vec::with_capacity(self.dim);
                let mut params = u.iter();
                for d in 0..self.dim {
                    if d == axis {
                        coords.push(value);
                    } else {
                        coords.push(*params.next().unwrap());
                    }
                }
                Point::new(coords)
            }
        }
    }

    /// Whether `p` satisfies the face's defining equation to within `BOUNDARY_TOL`.
    pub fn on_face(&self, p: &[f64]) -> bool {
        match self.geometry {
            FaceGeometry::Circle => (squared_distance(p, &[0.0, 0.0]) - 1.0).abs() <= BOUNDARY_TOL,
            FaceGeometry::Plane { axis, value } => {
                (p[axis] - value).abs() <= BOUNDARY_TOL
                    && p.iter()
                        .all(|&x| (-BOUNDARY_TOL..=1.0 + BOUNDARY_TOL).contains(&x))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Membership {
    Interior,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    faces: Vec<BoundaryFace>,
}

impl Domain {
    pub fn new(kind: DomainKind) -> Self {
        let dim = match kind {
            DomainKind::UnitDisk2D => 2,
            DomainKind::UnitCube3D => 3,
            DomainKind::SpaceTimeRect1Dx1T => 2,
        };
        let faces = match kind {
            DomainKind::UnitDisk2D => vec![BoundaryFace {
                id: 0,
                geometry: FaceGeometry::Circle,
                dim,
            }],
            // Face ids: 2*axis + (0 for the low side, 1 for the high side).
            DomainKind::UnitCube3D | DomainKind::SpaceTimeRect1Dx1T => (0..dim)
                .flat_map(|axis| [0.0, 1.0].map(|value| (axis, value)))
                .enumerate()
                .map(|(id, (axis, value))| BoundaryFace {
                    id,
                    geometry: FaceGeometry::Plane { axis, value },
                    dim,
                })
                .collect(),
        };
        Self { kind, faces }
    }

    pub fn unit_disk() -> Self {
        Self::new(DomainKind::UnitDisk2D)
    }

    pub fn unit_cube() -> Self {
        Self::new(DomainKind::UnitCube3D)
    }

    pub fn space_time_rect() -> Self {
        Self::new(DomainKind::SpaceTimeRect1Dx1T)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::UnitDisk2D | DomainKind::SpaceTimeRect1Dx1T => 2,
            DomainKind::UnitCube3D => 3,
        }
    }

    pub fn faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    pub fn face(&self, id: usize) -> Option<&BoundaryFace> {
        self.faces.get(id)
    }

    /// Exact classification of `p` with boundary tolerance `BOUNDARY_TOL`.
    pub fn contains(&self, p: &[f64]) -> Result<Membership> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        if !p.iter().all(|x| x.is_finite()) {
            return Ok(Membership::Outside);
        }
        Ok(match self.kind {
            DomainKind::UnitDisk2D => {
                let r2 = p[0] * p[0] + p[1] * p[1];
                if (r2 - 1.0).abs() <= BOUNDARY_TOL {
                    Membership::Boundary
                } else if r2 < 1.0 {
                    Membership::Interior
                } else {
                    Membership::Outside
                }
            }
            DomainKind::UnitCube3D | DomainKind::SpaceTimeRect1Dx1T => {
                if p.iter()
                    .any(|&x| !(-BOUNDARY_TOL..=1.0 + BOUNDARY_TOL).contains(&x))
                {
                    Membership::Outside
                } else if p
                    .iter()
                    .any(|&x| x.abs() <= BOUNDARY_TOL || (x - 1.0).abs() <= BOUNDARY_TOL)
                {
                    Membership::Boundary
                } else {
                    Membership::Interior
                }
            }
        })
    }

    /// First face whose defining equation `p` satisfies.
    pub fn face_of(&self, p: &[f64]) -> Option<usize> {
        self.faces.iter().find(|f| f.on_face(p)).map(|f| f.id)
    }

    /// `n` strictly interior points from the Sobol sequence after `skip` raw
    /// draws. The disk rejects draws from the bounding square `[-1,1]^2`, so
    /// accepted points keep their Sobol order.
    pub fn sample_interior(&self, n: usize, skip: u64) -> Result<Vec<Point>> {
        let sobol = Sobol::new(self.dim())?;
        let pts = match self.kind {
            DomainKind::UnitDisk2D => sobol
                .iter_from(skip)
                .map(|u| Point::new(vec![2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0]))
                .filter(|p| p[0] * p[0] + p[1] * p[1] < 1.0 - BOUNDARY_TOL)
                .take(n)
                .collect(),
            DomainKind::UnitCube3D | DomainKind::SpaceTimeRect1Dx1T => {
                sobol.iter_from(skip).take(n).collect()
            }
        };
        Ok(pts)
    }

    /// Splits `n` boundary points across faces in proportion to face measure
    /// (largest remainder, ties to lower face id).
    pub fn boundary_allocation(&self, n: usize) -> Vec<usize> {
        let total: f64 = self.faces.iter().map(|f| f.measure()).sum();
        let exact: Vec<f64> = self
            .faces
            .iter()
            .map(|f| n as f64 * f.measure() / total)
            .collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut left = n - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &f in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[f] += 1;
            left -= 1;
        }
        counts
    }

    /// `n` boundary points tagged with their face id. Each face draws from a
    /// Sobol sequence over its parameter space starting after `skip`.
    pub fn sample_boundary(&self, n: usize, skip: u64) -> Result<Vec<(Point, usize)>> {
        let counts = self.boundary_allocation(n);
        let sobol = Sobol::new(self.dim() - 1)?;
        let mut out = Vec::with_capacity(n);
        for (face, &count) in self.faces.iter().zip(&counts) {
            for u in sobol.iter_from(skip).take(count) {
                out.push((face.map(&u), face.id));
            }
        }
        Ok(out)
    }
}
