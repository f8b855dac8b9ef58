//! Mesh-free Gaussian-process collocation for linear PDEs.
//!
//! A GP prior with a squared-exponential ARD kernel is conditioned on
//! linear-operator observations at collocation points. Representer weights
//! come from a Cholesky solve or stochastic dual descent; the posterior
//! variance drives clustering-based selection of new collocation points.

pub mod adapt;
pub mod error;
pub mod geometry;
pub mod gram;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod posterior;
pub mod problem;
pub mod sobol;
pub mod solvers;

pub use adapt::{active_learning_loop, ALConfig, ALHistory, StopStatus, WeightSolver};
pub use error::{Error, Result};
pub use geometry::{Domain, DomainKind, Membership, Point};
pub use gram::{assemble_dense, default_lambda, CollocationEntry, CollocationSet, GramSystem};
pub use kernels::{KernelParams, OperatorSpec};
pub use posterior::{PosteriorModel, VarianceMode};
pub use problem::{BoundaryCondition, ProblemSpec};
pub use solvers::{solve_direct, solve_sdd, RepresenterWeights, SddConfig};
