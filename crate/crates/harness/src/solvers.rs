use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use amp_core::baselines::{brute_force, cosamp, fista_enet, nnomp, omp};
use amp_core::{amp, AmpConfig, Solution, SolverReport, SparseProblem};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Amp,
    /// Plain OMP; switches to the non-negative variant on constrained problems.
    Omp,
    NnOmp,
    Cosamp,
    /// FISTA on the elastic net.
    Fista,
    /// Exhaustive support search.
    Oracle,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] =
        [SolverKind::Amp, SolverKind::Omp, SolverKind::NnOmp, SolverKind::Cosamp, SolverKind::Fista, SolverKind::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Amp => "amp",
            SolverKind::Omp => "omp",
            SolverKind::NnOmp => "nnomp",
            SolverKind::Cosamp => "cosamp",
            SolverKind::Fista => "fista",
            SolverKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "enet" | "fista-enet" | "fista_enet" => "fista",
            "brute" | "brute-force" | "brute_force" => "oracle",
            other => other,
        };
        SolverKind::ALL.into_iter().find(|k| k.name() == alias).ok_or(HarnessError::UnknownSolver(s))
    }
}

/// Parses a comma-separated solver list, keeping the given order.
pub fn parse_solver_list(s: &str) -> Result<Vec<SolverKind>, HarnessError> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let kind: SolverKind = part.parse()?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    if out.is_empty() {
        return Err(HarnessError::InvalidSpec("empty solver list".into()));
    }
    Ok(out)
}

/// Knobs for every solver the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub amp: AmpConfig,
    /// Elastic-net l1 weight; `None` picks `2 sigma sqrt(2 ln p)`.
    pub fista_l1: Option<f64>,
    /// Elastic-net l2 weight; `None` uses the problem's `lambda`.
    pub fista_l2: Option<f64>,
    pub fista_max_iter: usize,
    pub fista_tol: f64,
    pub cosamp_max_iter: usize,
    pub oracle_max_support: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            amp: AmpConfig::default(),
            fista_l1: None,
            fista_l2: None,
            fista_max_iter: 5000,
            fista_tol: 1e-10,
            cosamp_max_iter: 100,
            oracle_max_support: None,
        }
    }
}

impl SolverSettings {
    /// Universal-threshold weight: with the unhalved squared loss the lasso
    /// keeps `|a_i^T r| > l1 / 2`, i.e. above `sigma sqrt(2 ln p)`.
    pub fn default_l1(sigma: f64, p: usize) -> f64 {
        2.0 * sigma * (2.0 * (p.max(2) as f64).ln()).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Solution,
    pub elapsed: Duration,
    /// Present for AMP runs.
    pub report: Option<SolverReport>,
    /// False when an iterative baseline stopped at its cap.
    pub converged: bool,
}

/// Runs one solver. `k` is the sparsity handed to OMP and CoSaMP, `sigma`
/// only feeds the default elastic-net weight. Timing covers the solver call
/// only.
pub fn solve(kind: SolverKind, prob: &SparseProblem, k: usize, sigma: f64, settings: &SolverSettings) -> Result<SolveOutcome, HarnessError> {
    let k = k.clamp(1, prob.p());
    let started = Instant::now();
    let (solution, report, converged) = match kind {
        SolverKind::Amp => {
            let rep = amp(prob, &settings.amp)?;
            (rep.solution.clone(), Some(rep), true)
        }
        SolverKind::Omp if prob.nonneg() => (nnomp(prob, k)?, None, true),
        SolverKind::Omp => (omp(prob, k)?, None, true),
        SolverKind::NnOmp => (nnomp(prob, k)?, None, true),
        SolverKind::Cosamp => (cosamp(prob, k, settings.cosamp_max_iter)?, None, true),
        SolverKind::Fista => {
            let l1 = settings.fista_l1.unwrap_or_else(|| SolverSettings::default_l1(sigma, prob.p()));
            let l2 = settings.fista_l2.unwrap_or(prob.lambda());
            let res = fista_enet(prob, l1, l2, settings.fista_max_iter, settings.fista_tol)?;
            (res.solution, None, res.converged)
        }
        SolverKind::Oracle => (brute_force(prob, settings.oracle_max_support)?, None, true),
    };
    Ok(SolveOutcome { solution, elapsed: started.elapsed(), report, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names_and_aliases() {
        let v = parse_solver_list("amp, OMP,fista,enet").unwrap();
        assert_eq!(v, vec![SolverKind::Amp, SolverKind::Omp, SolverKind::Fista]);
        assert!(matches!(parse_solver_list("amp,lars"), Err(HarnessError::UnknownSolver(s)) if s == "lars"));
        assert!(parse_solver_list(" , ").is_err());
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
        }
    }

    #[test]
    fn default_l1_scale() {
        let l1 = SolverSettings::default_l1(0.01, 512);
        assert!((l1 - 0.02 * (2.0 * 512f64.ln()).sqrt()).abs() < 1e-15);
    }
}
