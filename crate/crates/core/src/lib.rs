//! Sparse recovery under spike-and-slab priors by adaptive matching pursuit.
//!
//! * [`linalg`]: dense primitives and the incrementally maintained Cholesky factor.
//! * [`model`]: problem definition, penalties and the exact objective.
//! * [`solver`]: the pursuit itself, with its non-negative variant.
//! * [`baselines`]: OMP/NNOMP, CoSaMP, FISTA on the elastic net, and exhaustive search.

pub mod baselines;
pub mod linalg;
pub mod model;
pub mod solver;

pub use linalg::{CholFactor, Mat, Triangle};
pub use model::{g_exact, residual_corr, rho_from_prior, PriorParams, Solution, SparseProblem, Support};
pub use solver::{amp, AmpConfig, SolverReport, Termination};
