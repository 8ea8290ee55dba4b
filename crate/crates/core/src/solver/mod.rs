//! Adaptive matching pursuit.
//!
//! Each iteration moves the active set by exactly one index. The candidate
//! moves are scored with cheap upper bounds on the change of the restricted
//! objective `g(S)`:
//!
//! ```text
//! insert i: rho_i - (r_S^T d_i)^2 / (1 + lambda)
//! remove j: (1 + lambda) x_j^2 + 2 d_j^T r_S x_j - rho_j
//! ```
//!
//! The loop stops once neither bound is negative. Ties between a negative
//! insertion and removal bound resolve to removal. After every accepted move
//! the coefficients and residual are recomputed exactly from the updated
//! Cholesky factor.
//!
//! In non-negative mode the coefficient solve becomes an NNLS problem (handled
//! by [`nnls_admm`]) and the insertion bound only credits positive correlation.

mod admm;

pub use admm::{nnls_admm, AdmmConfig, AdmmOutcome};

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, CholFactor, LinalgError, Mat, PIVOT_EPS};
use crate::model::{residual_corr, ModelError, Solution, SparseProblem, Support};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpConfig {
    /// Cap on loop passes; `None` means `10 * p`.
    pub max_iter: Option<usize>,
    pub pivot_eps: f64,
    pub nn_admm: AdmmConfig,
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig { max_iter: None, pivot_eps: PIVOT_EPS, nn_admm: AdmmConfig::default() }
    }
}

impl AmpConfig {
    fn validate(&self) -> Result<(), SolverError> {
        if self.max_iter == Some(0) {
            return Err(SolverError::Config("max_iter must be at least 1".into()));
        }
        if !(self.nn_admm.tol > 0.0) || !(self.nn_admm.penalty > 0.0) {
            return Err(SolverError::Config("ADMM tolerance and penalty must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Neither bound could improve the objective.
    Converged,
    MaxIter,
    /// Stopped after at least one candidate move was rejected for numerical
    /// reasons (dependent column, or no realized decrease).
    NumericalReject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    Insert(usize),
    Remove(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub solution: Solution,
    /// Restricted objective after initialization and after every accepted move.
    pub cost_trace: Vec<f64>,
    /// Loop passes, including passes whose move was rejected.
    pub iterations: usize,
    pub wall_time: Duration,
    pub termination: Termination,
    pub initial_support: Vec<usize>,
    /// Accepted moves, in order.
    pub moves: Vec<Move>,
    /// Candidates barred after a rejected move.
    pub rejected: Vec<Move>,
    /// Inner NNLS solves that stopped at their iteration cap.
    pub nn_unconverged: usize,
}

impl SolverReport {
    /// Sorted supports visited by the run, starting with the initial one.
    pub fn visited_supports(&self) -> Vec<Vec<usize>> {
        let mut current = self.initial_support.clone();
        let mut out = vec![sorted(&current)];
        for m in &self.moves {
            match *m {
                Move::Insert(i) => current.push(i),
                Move::Remove(j) => current.retain(|&k| k != j),
            }
            out.push(sorted(&current));
        }
        out
    }
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Every index with a negative penalty belongs to any optimal support, so the
/// search starts from exactly that set (ascending order).
pub fn init_support(rho: &[f64]) -> Support {
    let indices: Vec<usize> = (0..rho.len()).filter(|&i| rho[i] < 0.0).collect();
    Support::from_indices(rho.len(), &indices).expect("indices are distinct and in range")
}

/// A scored candidate move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub value: f64,
    pub index: usize,
}

fn better(best: Option<Candidate>, value: f64, index: usize) -> Option<Candidate> {
    match best {
        Some(b) if b.value <= value => Some(b),
        _ => Some(Candidate { value, index }),
    }
}

/// Working state of one AMP run.
#[derive(Debug, Clone)]
pub struct AmpState {
    support: Support,
    factor: CholFactor,
    /// `A_S^T A_S + lambda I`, maintained only in non-negative mode.
    gram: Option<Mat>,
    xs: Vec<f64>,
    residual: Vec<f64>,
    /// `A^T r` for every column.
    corr: Vec<f64>,
    cost: f64,
    iter: usize,
    nn_unconverged: usize,
}

impl AmpState {
    /// Builds the initial state on `support` with the factor computed directly.
    pub fn new(prob: &SparseProblem, support: Support, cfg: &AmpConfig) -> Result<Self, SolverError> {
        let gram = prob.a().gram_of(support.indices(), prob.lambda());
        let factor = if support.is_empty() { CholFactor::empty() } else { CholFactor::factor(&gram)? };
        let mut state = AmpState {
            factor,
            gram: prob.nonneg().then_some(gram),
            xs: Vec::new(),
            residual: prob.y().to_vec(),
            corr: Vec::new(),
            cost: 0.0,
            iter: 0,
            nn_unconverged: 0,
            support,
        };
        let warm = vec![0.0; state.support.len()];
        state.refresh(prob, cfg, &warm)?;
        Ok(state)
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn factor(&self) -> &CholFactor {
        &self.factor
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.xs
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    /// Restricted coefficients for the current support.
    ///
    /// Unconstrained: `L u = w^S`, then `L^T x^S = u`, with `w = A^T y`.
    /// Non-negative: NNLS on the active Gram matrix, warm-started at `warm`.
    pub fn solve_coeffs(&mut self, prob: &SparseProblem, cfg: &AmpConfig, warm: &[f64]) -> Result<Vec<f64>, SolverError> {
        let w: Vec<f64> = self.support.indices().iter().map(|&i| dot(prob.a().col(i), prob.y())).collect();
        match &self.gram {
            Some(gram) => {
                let out = nnls_admm(gram, &w, &cfg.nn_admm, Some(warm))?;
                if !out.converged {
                    self.nn_unconverged += 1;
                }
                Ok(out.x)
            }
            None => Ok(self.factor.solve(&w)?),
        }
    }

    /// Exact coefficients, residual, correlations and cost for the current support.
    fn refresh(&mut self, prob: &SparseProblem, cfg: &AmpConfig, warm: &[f64]) -> Result<(), SolverError> {
        self.xs = self.solve_coeffs(prob, cfg, warm)?;
        self.residual = prob.residual(self.support.indices(), &self.xs);
        self.corr = prob.a().tr_matvec(&self.residual);
        self.cost = prob.restricted_value(self.support.indices(), &self.xs, &self.residual);
        Ok(())
    }

    /// Best insertion bound over indices outside the support and not barred.
    /// `None` stands for `+inf` (nothing to insert).
    pub fn ubar(&self, prob: &SparseProblem, barred: &[bool]) -> Option<Candidate> {
        let energy = prob.atom_energy();
        let mut best = None;
        for i in 0..prob.p() {
            if self.support.contains(i) || barred.get(i).copied().unwrap_or(false) {
                continue;
            }
            let c = if prob.nonneg() { self.corr[i].max(0.0) } else { self.corr[i] };
            best = better(best, prob.rho()[i] - c * c / energy, i);
        }
        best
    }

    /// Best removal bound over the support. `None` stands for `+inf`.
    pub fn vbar(&self, prob: &SparseProblem, barred: &[bool]) -> Option<Candidate> {
        let energy = prob.atom_energy();
        let mut best = None;
        for (pos, &j) in self.support.indices().iter().enumerate() {
            if barred.get(j).copied().unwrap_or(false) {
                continue;
            }
            let x = self.xs[pos];
            let d = residual_corr(prob, &self.support, &self.xs, &self.residual, j);
            best = better(best, energy * x * x + 2.0 * d * x - prob.rho()[j], j);
        }
        best
    }

    fn insert(&mut self, prob: &SparseProblem, cfg: &AmpConfig, i: usize) -> Result<(), SolverError> {
        let a_i = prob.a().col(i);
        let g: Vec<f64> = self.support.indices().iter().map(|&s| dot(prob.a().col(s), a_i)).collect();
        self.factor.insert(&g, prob.atom_energy(), cfg.pivot_eps)?;
        if let Some(gram) = &mut self.gram {
            let n = gram.rows();
            *gram = Mat::from_fn(n + 1, n + 1, |r, c| match (r == n, c == n) {
                (false, false) => gram[(r, c)],
                (true, true) => prob.atom_energy(),
                (true, false) => g[c],
                (false, true) => g[r],
            });
        }
        let c = if prob.nonneg() { self.corr[i].max(0.0) } else { self.corr[i] };
        let mut warm = self.xs.clone();
        warm.push(c / prob.atom_energy());
        self.support.insert(i);
        self.refresh(prob, cfg, &warm)
    }

    fn remove(&mut self, prob: &SparseProblem, cfg: &AmpConfig, j: usize) -> Result<(), SolverError> {
        let pos = self.support.position(j).expect("removal candidate is in the support");
        self.factor.remove(pos)?;
        if let Some(gram) = &mut self.gram {
            let n = gram.rows();
            let skip = |k: usize| if k >= pos { k + 1 } else { k };
            *gram = Mat::from_fn(n - 1, n - 1, |r, c| gram[(skip(r), skip(c))]);
        }
        let mut warm = self.xs.clone();
        warm.remove(pos);
        self.support.remove_at(pos);
        self.refresh(prob, cfg, &warm)
    }
}

/// Move selection: stop when `min(ubar, vbar) >= 0`, insert when `ubar < vbar`,
/// otherwise remove. `None` bounds count as `+inf`.
pub fn decide(ubar: Option<Candidate>, vbar: Option<Candidate>) -> Option<Move> {
    let u = ubar.map_or(f64::INFINITY, |c| c.value);
    let v = vbar.map_or(f64::INFINITY, |c| c.value);
    if u.min(v) >= 0.0 {
        None
    } else if u < v {
        ubar.map(|c| Move::Insert(c.index))
    } else {
        vbar.map(|c| Move::Remove(c.index))
    }
}

/// Runs adaptive matching pursuit on `prob`.
pub fn amp(prob: &SparseProblem, cfg: &AmpConfig) -> Result<SolverReport, SolverError> {
    cfg.validate()?;
    let started = Instant::now();
    let p = prob.p();
    let max_iter = cfg.max_iter.unwrap_or(10 * p).max(1);

    let init = init_support(prob.rho());
    let initial_support = init.indices().to_vec();
    let mut state = AmpState::new(prob, init, cfg)?;
    let mut cost_trace = vec![state.cost];
    let mut moves = Vec::new();
    let mut rejected = Vec::new();
    let mut bar_insert = vec![false; p];
    let mut bar_remove = vec![false; p];

    let termination = loop {
        if state.iter >= max_iter {
            break Termination::MaxIter;
        }
        let u = state.ubar(prob, &bar_insert);
        let v = state.vbar(prob, &bar_remove);
        let Some(mv) = decide(u, v) else {
            break if rejected.is_empty() { Termination::Converged } else { Termination::NumericalReject };
        };
        state.iter += 1;

        let previous = state.clone();
        let applied = match mv {
            Move::Insert(i) => state.insert(prob, cfg, i),
            Move::Remove(j) => state.remove(prob, cfg, j),
        };
        let accepted = match applied {
            Ok(()) => state.cost < previous.cost,
            Err(SolverError::Linalg(LinalgError::NegativePivot { .. })) => false,
            Err(e) => return Err(e),
        };
        if accepted {
            cost_trace.push(state.cost);
            moves.push(mv);
        } else {
            let iter = state.iter;
            let nn = state.nn_unconverged;
            state = previous;
            state.iter = iter;
            state.nn_unconverged = nn;
            match mv {
                Move::Insert(i) => bar_insert[i] = true,
                Move::Remove(j) => bar_remove[j] = true,
            }
            rejected.push(mv);
        }
    };

    let mut solution = Solution::from_support(prob, state.support.indices(), &state.xs)?;
    solution.cost = state.cost;
    Ok(SolverReport {
        solution,
        cost_trace,
        iterations: state.iter,
        wall_time: started.elapsed(),
        termination,
        initial_support,
        moves,
        rejected,
        nn_unconverged: state.nn_unconverged,
    })
}
