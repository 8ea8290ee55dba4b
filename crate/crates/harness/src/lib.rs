//! Experiment drivers for the sparse-recovery solvers: seeded synthetic
//! instances, metrics, table/sweep/image runs, and the file formats they
//! read and write (CSV, JSON, IDX, PGM).

pub mod experiment;
pub mod idx;
pub mod images;
pub mod metrics;
pub mod pgm;
pub mod solvers;
pub mod synth;

use amp_core::baselines::BaselineError;
use amp_core::model::ModelError;
use amp_core::solver::SolverError;
use thiserror::Error;

pub use experiment::{oracle_check, run_sweep, run_table, AggregateRow, ExperimentResult, OracleCheck, TableSpec, TrialRow};
pub use images::{run_image_recovery, synthetic_digits, ImageSet, ImageSpec};
pub use metrics::Metrics;
pub use solvers::{SolverKind, SolverSettings};
pub use synth::{gen_problem, Instance, Penalty, RhoPolicy, SynthSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("unknown solver `{0}` (expected one of amp, omp, nnomp, cosamp, fista, oracle)")]
    UnknownSolver(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Idx(#[from] idx::IdxError),
    #[error(transparent)]
    Pgm(#[from] pgm::PgmError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

/// Runs `f(0..n)` on `threads` workers and returns results in index order.
pub(crate) fn par_map<T, F>(threads: usize, n: usize, f: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if threads <= 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}
