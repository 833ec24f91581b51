//! Discretized Markov environment: per-period grids, transition kernels,
//! utilities, assumption checks and path sampling.

pub mod checks;
pub mod environment;
pub mod grid;
pub mod kernel;
pub mod sampler;
pub mod utility;

pub use checks::{ValidationReport, Violation};
pub use environment::{build_environment, Environment, EnvironmentSpec, InitialLaw};
pub use grid::{PeriodGrid, Weights};
pub use kernel::{AffineUniform, TabularKernel, TransitionKernel};
pub use sampler::{sample_trajectory, Trajectory};
pub use utility::{horner, Monomial, Poly2, UtilitySpec};
