//! The three benchmark problems.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use gp_pde::kernels::KernelParams;
use gp_pde::problem::{BoundaryCondition, ProblemSpec};
use gp_pde::{Domain, OperatorSpec, Result};

pub const HEAT_DIFFUSIVITY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    PoissonDisk,
    Poisson3d,
    Heat1d,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::PoissonDisk, Case::Poisson3d, Case::Heat1d];

    pub fn name(self) -> &'static str {
        match self {
            Case::PoissonDisk => "poisson-disk",
            Case::Poisson3d => "poisson-3d",
            Case::Heat1d => "heat-1d",
        }
    }

    pub fn problem(self) -> ProblemSpec {
        match self {
            Case::PoissonDisk => poisson_disk(),
            Case::Poisson3d => poisson_3d(),
            Case::Heat1d => heat_1d(),
        }
        .expect("built-in case definitions are valid")
    }

    pub fn default_kernel(self) -> KernelParams {
        let ls = match self {
            Case::PoissonDisk => vec![0.5, 0.5],
            Case::Poisson3d => vec![0.4, 0.4, 0.4],
            Case::Heat1d => vec![0.3, 0.6],
        };
        KernelParams::new(1.0, ls).expect("valid default kernel")
    }

    /// Published relative MSE (percent) for a PINN, shown for reference only.
    pub fn pinn_reference(self) -> f64 {
        match self {
            Case::PoissonDisk => 83.91,
            Case::Poisson3d => 206.52,
            Case::Heat1d => 12.80,
        }
    }

    /// Published relative MSE (percent) for the adaptive SDD GP.
    pub fn published_sdd_al(self) -> f64 {
        match self {
            Case::PoissonDisk => 1.21,
            Case::Poisson3d => 1.41,
            Case::Heat1d => 1.11,
        }
    }

    /// Published relative MSE (percent) for the exact GP.
    pub fn published_exact(self) -> f64 {
        match self {
            Case::PoissonDisk => 1.83,
            Case::Poisson3d => 2.12,
            Case::Heat1d => 3.71,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Case::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| {
                format!(
                    "unknown case '{s}' (expected one of: {})",
                    Case::ALL.map(Case::name).join(", ")
                )
            })
    }
}

pub fn disk_truth(z: &[f64]) -> f64 {
    (1.0 - z[0] * z[0] - z[1] * z[1]) / 4.0
}

pub fn cube_truth(z: &[f64]) -> f64 {
    z.iter().map(|x| (PI * x).sin()).product()
}

pub fn cube_source(z: &[f64]) -> f64 {
    3.0 * PI * PI * cube_truth(z)
}

/// Separable solution of the heat equation with `u(x, 0) = sin(pi x)` and
/// zero Dirichlet ends. Coordinates are `(x, t)`.
pub fn heat_reference(z: &[f64]) -> f64 {
    (PI * z[0]).sin() * (-HEAT_DIFFUSIVITY * PI * PI * z[1]).exp()
}

/// `-lap u = 1` on the unit disk with `u = 0` on the circle.
pub fn poisson_disk() -> Result<ProblemSpec> {
    ProblemSpec::new(
        "poisson-disk",
        Domain::unit_disk(),
        OperatorSpec::neg_laplacian(2),
        |_| 1.0,
        vec![BoundaryCondition::dirichlet(2, |_| 0.0)],
        Some(Arc::new(disk_truth)),
    )
}

/// `-lap u = 3 pi^2 sin(pi x1) sin(pi x2) sin(pi x3)` on the unit cube, zero on faces.
pub fn poisson_3d() -> Result<ProblemSpec> {
    let faces = (0..6).map(|_| BoundaryCondition::dirichlet(3, |_| 0.0)).collect();
    ProblemSpec::new(
        "poisson-3d",
        Domain::unit_cube(),
        OperatorSpec::neg_laplacian(3),
        cube_source,
        faces,
        Some(Arc::new(cube_truth)),
    )
}

/// `u_t = alpha u_xx` on `(0,1) x (0,1]` with `u(x,0) = sin(pi x)`, zero ends
/// and `u_t(x, 1) = 0`.
pub fn heat_1d() -> Result<ProblemSpec> {
    let faces = vec![
        BoundaryCondition::dirichlet(2, |_| 0.0),
        BoundaryCondition::dirichlet(2, |_| 0.0),
        BoundaryCondition::dirichlet(2, |z| (PI * z[0]).sin()),
        BoundaryCondition::new(OperatorSpec::partial(2, 1, 1)?, |_| 0.0),
    ];
    ProblemSpec::new(
        "heat-1d",
        Domain::space_time_rect(),
        OperatorSpec::heat(HEAT_DIFFUSIVITY),
        |_| 0.0,
        faces,
        Some(Arc::new(heat_reference)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn truth_values() {
        assert_eq!(disk_truth(&[0.0, 0.0]), 0.25);
        assert!(disk_truth(&[0.6, 0.8]).abs() < 1e-15);
        assert_relative_eq!(cube_truth(&[0.5, 0.5, 0.5]), 1.0);
        for p in [[0.0, 0.3, 0.7], [0.2, 1.0, 0.5], [0.9, 0.1, 0.0]] {
            assert!(cube_truth(&p).abs() < 1e-15);
        }
        assert_eq!(heat_reference(&[0.5, 0.0]), 1.0);
        assert_relative_eq!(heat_reference(&[0.5, 1.0]), 0.9061, epsilon = 1e-4);
    }

    #[test]
    fn case_names_round_trip() {
        for c in Case::ALL {
            assert_eq!(c.name().parse::<Case>().unwrap(), c);
            assert_eq!(c.problem().name, c.name());
            assert_eq!(c.default_kernel().dim(), c.problem().dim());
        }
        assert_eq!("heat_1d".parse::<Case>().unwrap(), Case::Heat1d);
        assert!("nosuchcase".parse::<Case>().is_err());
    }
}
