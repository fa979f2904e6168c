//! Constrained approximate lumping of polynomial and rational ODE systems.
//!
//! The pipeline is: parse a model ([`model`]), sample a basis of its Jacobian
//! space ([`jacobian`]), grow a lumping matrix from the observables
//! ([`lumping`]), and compare the reduced dynamics with the original ones
//! ([`simulate`]). [`cli`] wires these stages to the `lumpkit` binary.

pub mod artifacts;
pub mod cli;
pub mod jacobian;
pub mod linalg;
pub mod lumping;
pub mod model;
pub mod rng;
pub mod simulate;

pub use jacobian::{basis_from_points, sample_jacobian_basis, JacobianBasis, JacobianError, SamplingDomain};
pub use lumping::{
    approximate_lump, deviation, epsilon_max, find_epsilon, EpsilonSearch, EpsilonSearchConfig, LumpingError,
    LumpingMatrix,
};
pub use model::{parse_model, Expr, ModelError, OdeSystem};
pub use simulate::{reduction_report, ReductionReport, ReportOptions, SimError, SolveError, SolverConfig};
