//! Reference solvers for comparison rows and correctness checks.
//!
//! All least-squares refits here are ridge-regularized with the problem's
//! `lambda`, so every solver is scored on the same objective.

use itertools::Itertools;
use thiserror::Error;

use crate::linalg::{axpy, dot, norm2, norm2_sq, CholFactor, LinalgError, Mat, PIVOT_EPS};
use crate::model::{g_exact, nnls_active_set, ModelError, Solution, SparseProblem};

/// Largest `p` for which an uncapped exhaustive search is allowed.
pub const BRUTE_FORCE_MAX_P: usize = 14;
/// Largest number of supports a capped exhaustive search may visit.
pub const BRUTE_FORCE_MAX_SUPPORTS: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("sparsity k = {k} must be in 1..={p}")]
    InvalidSparsity { k: usize, p: usize },
    #[error("weights must be non-negative and finite")]
    InvalidWeights,
    #[error("exhaustive search over p = {p} (cap {cap:?}) exceeds the enumeration budget")]
    TooLarge { p: usize, cap: Option<usize> },
    #[error("{0} does not support non-negative problems")]
    Unsupported(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which reference solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Omp,
    NnOmp,
    Cosamp,
    FistaEnet,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// Target sparsity for OMP and CoSaMP.
    pub k: usize,
    /// l1 weight for the elastic net.
    pub l1: f64,
    /// l2 weight for the elastic net.
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Support-size cap for the exhaustive search.
    pub max_support: Option<usize>,
}

impl BaselineConfig {
    pub fn new(kind: BaselineKind) -> Self {
        BaselineConfig { kind, k: 1, l1: 0.0, l2: 0.0, max_iter: 5000, tol: 1e-10, max_support: None }
    }

    pub fn run(&self, prob: &SparseProblem) -> Result<Solution, BaselineError> {
        match self.kind {
            BaselineKind::Omp => omp(prob, self.k),
            BaselineKind::NnOmp => nnomp(prob, self.k),
            BaselineKind::Cosamp => cosamp(prob, self.k, self.max_iter.min(100)),
            BaselineKind::FistaEnet => fista_enet(prob, self.l1, self.l2, self.max_iter, self.tol).map(|f| f.solution),
            BaselineKind::Oracle => brute_force(prob, self.max_support),
        }
    }
}

/// Ridge refit on `support`: solves `(A_S^T A_S + lambda I) x = A_S^T y`,
/// or its non-negative version.
fn refit(prob: &SparseProblem, support: &[usize], nonneg: bool) -> Result<Vec<f64>, BaselineError> {
    if support.is_empty() {
        return Ok(Vec::new());
    }
    let gram = prob.a().gram_of(support, prob.lambda());
    let w: Vec<f64> = support.iter().map(|&i| dot(prob.a().col(i), prob.y())).collect();
    if nonneg {
        Ok(nnls_active_set(&gram, &w)?)
    } else {
        Ok(CholFactor::factor(&gram)?.solve(&w)?)
    }
}

fn scatter(p: usize, support: &[usize], xs: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; p];
    for (&i, &v) in support.iter().zip(xs) {
        x[i] = v;
    }
    x
}

fn greedy_omp(prob: &SparseProblem, k: usize, nonneg: bool) -> Result<Solution, BaselineError> {
    let p = prob.p();
    if k == 0 || k > p {
        return Err(BaselineError::InvalidSparsity { k, p });
    }
    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut active = vec![false; p];
    let mut factor = CholFactor::empty();
    let mut xs: Vec<f64> = Vec::new();
    let mut r = prob.y().to_vec();
    for _ in 0..k {
        let corr = prob.a().tr_matvec(&r);
        let score = |i: usize| if nonneg { corr[i] } else { corr[i].abs() };
        let Some(best) = (0..p).filter(|&i| !active[i]).max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a)))
        else {
            break;
        };
        if score(best) <= 0.0 {
            break;
        }
        let g: Vec<f64> = support.iter().map(|&s| dot(prob.a().col(s), prob.a().col(best))).collect();
        if factor.insert(&g, prob.atom_energy(), PIVOT_EPS).is_err() {
            break;
        }
        support.push(best);
        active[best] = true;
        xs = if nonneg {
            refit(prob, &support, true)?
        } else {
            let w: Vec<f64> = support.iter().map(|&i| dot(prob.a().col(i), prob.y())).collect();
            factor.solve(&w)?
        };
        r = prob.residual(&support, &xs);
    }
    Ok(Solution::from_dense(prob, scatter(p, &support, &xs))?)
}

/// Orthogonal matching pursuit: `k` rounds of max-|correlation| selection,
/// each followed by a ridge refit on the selected columns.
pub fn omp(prob: &SparseProblem, k: usize) -> Result<Solution, BaselineError> {
    greedy_omp(prob, k, false)
}

/// Non-negative OMP: selects by largest positive correlation and refits under
/// `x >= 0`.
pub fn nnomp(prob: &SparseProblem, k: usize) -> Result<Solution, BaselineError> {
    greedy_omp(prob, k, true)
}

fn top_by_magnitude(v: &[f64], candidates: impl Iterator<Item = usize>, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = candidates.collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// CoSaMP: merge the `2k` strongest proxy entries with the current support,
/// ridge least squares on the merged set, prune to `k`, refit. Stops when the
/// residual stops decreasing.
pub fn cosamp(prob: &SparseProblem, k: usize, max_iter: usize) -> Result<Solution, BaselineError> {
    let p = prob.p();
    if k == 0 || k > p {
        return Err(BaselineError::InvalidSparsity { k, p });
    }
    if prob.nonneg() {
        return Err(BaselineError::Unsupported("CoSaMP"));
    }
    let mut x = vec![0.0; p];
    let mut r = prob.y().to_vec();
    let mut r_norm = norm2(&r);
    for _ in 0..max_iter {
        let proxy = prob.a().tr_matvec(&r);
        let mut merged = top_by_magnitude(&proxy, 0..p, 2 * k);
        merged.extend((0..p).filter(|&i| x[i] != 0.0));
        merged.sort_unstable();
        merged.dedup();
        let b = scatter(p, &merged, &refit(prob, &merged, false)?);
        let mut kept = top_by_magnitude(&b, merged.iter().copied(), k);
        kept.sort_unstable();
        let x_new = scatter(p, &kept, &refit(prob, &kept, false)?);
        let r_new = prob.residual(&kept, &kept.iter().map(|&i| x_new[i]).collect::<Vec<_>>());
        let new_norm = norm2(&r_new);
        if new_norm >= r_norm * (1.0 - 1e-9) {
            if new_norm < r_norm {
                x = x_new;
            }
            break;
        }
        x = x_new;
        r = r_new;
        r_norm = new_norm;
    }
    Ok(Solution::from_dense(prob, x)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FistaResult {
    pub solution: Solution,
    pub iterations: usize,
    /// False when `max_iter` was reached before the relative objective change
    /// dropped below `tol`.
    pub converged: bool,
}

/// Largest eigenvalue of `A^T A` by power iteration from a fixed start.
fn spectral_norm_sq(a: &Mat) -> f64 {
    let p = a.cols();
    if p == 0 || a.rows() == 0 {
        return 0.0;
    }
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut est = 0.0;
    for _ in 0..200 {
        let w = a.tr_matvec(&a.matvec(&v));
        let n = norm2(&w);
        if n == 0.0 {
            return 0.0;
        }
        let prev = est;
        est = n;
        v = w.into_iter().map(|x| x / n).collect();
        if (est - prev).abs() <= 1e-10 * est {
            break;
        }
    }
    est
}

fn enet_objective(prob: &SparseProblem, x: &[f64], l1: f64, l2: f64) -> f64 {
    let mut r = prob.y().to_vec();
    axpy(-1.0, &prob.a().matvec(x), &mut r);
    norm2_sq(&r) + l2 * norm2_sq(x) + l1 * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Accelerated proximal gradient on the elastic net
/// `||y - A x||^2 + l2 ||x||^2 + l1 ||x||_1`. Non-negative problems clamp in
/// the proximal step.
pub fn fista_enet(prob: &SparseProblem, l1: f64, l2: f64, max_iter: usize, tol: f64) -> Result<FistaResult, BaselineError> {
    if !(l1 >= 0.0 && l2 >= 0.0 && l1.is_finite() && l2.is_finite()) {
        return Err(BaselineError::InvalidWeights);
    }
    let p = prob.p();
    // Smooth part gradient 2 A^T (A x - y) + 2 l2 x; 1% slack on the
    // power-iteration estimate.
    let lipschitz = 2.0 * (1.01 * spectral_norm_sq(prob.a()) + l2);
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };
    let thresh = l1 * step;
    let nonneg = prob.nonneg();
    let prox = |v: f64| {
        if nonneg {
            (v - thresh).max(0.0)
        } else {
            v.signum() * (v.abs() - thresh).max(0.0)
        }
    };

    let mut x = vec![0.0; p];
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut obj = enet_objective(prob, &x, l1, l2);
    let mut iterations = 0;
    let mut converged = false;
    let mut restarted = false;
    while iterations < max_iter {
        iterations += 1;
        let mut resid = prob.a().matvec(&z);
        axpy(-1.0, prob.y(), &mut resid);
        let grad = prob.a().tr_matvec(&resid);
        let u: Vec<f64> = (0..p).map(|i| prox(z[i] - step * 2.0 * (grad[i] + l2 * z[i]))).collect();
        let obj_u = enet_objective(prob, &u, l1, l2);
        if obj_u > obj {
            // Adaptive restart: drop momentum and retry from x. A plain
            // proximal step that still fails to descend means roundoff floor.
            if restarted {
                converged = true;
                break;
            }
            restarted = true;
            t = 1.0;
            z = x.clone();
            continue;
        }
        restarted = false;
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        z = (0..p).map(|i| u[i] + momentum * (u[i] - x[i])).collect();
        let rel = (obj - obj_u) / obj.abs().max(f64::MIN_POSITIVE);
        x = u;
        obj = obj_u;
        t = t_next;
        if rel <= tol {
            converged = true;
            break;
        }
    }
    Ok(FistaResult { solution: Solution::from_dense(prob, x)?, iterations, converged })
}

/// Global minimizer of the objective by enumerating supports (all of them, or
/// all up to `max_support` indices).
pub fn brute_force(prob: &SparseProblem, max_support: Option<usize>) -> Result<Solution, BaselineError> {
    let p = prob.p();
    let cap = max_support.map_or(p, |c| c.min(p));
    let count: u64 = (0..=cap).map(|k| binomial(p as u64, k as u64)).sum();
    let allowed = match max_support {
        None => p <= BRUTE_FORCE_MAX_P,
        Some(_) => count <= BRUTE_FORCE_MAX_SUPPORTS,
    };
    if !allowed {
        return Err(BaselineError::TooLarge { p, cap: max_support });
    }
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for k in 0..=cap {
        for support in (0..p).combinations(k) {
            let (g, xs) = g_exact(prob, &support)?;
            if best.as_ref().is_none_or(|(b, _, _)| g < *b) {
                best = Some((g, support, xs));
            }
        }
    }
    let (_, support, xs) = best.expect("the empty support is always enumerated");
    Ok(Solution::from_support(prob, &support, &xs)?)
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(rows: &[Vec<f64>], y: Vec<f64>, lambda: f64, rho: f64, nonneg: bool) -> SparseProblem {
        let p = rows[0].len();
        SparseProblem::from_raw(Mat::from_rows(rows).unwrap(), y, lambda, vec![rho; p], nonneg).unwrap().0
    }

    fn small() -> SparseProblem {
        problem(
            &[vec![1.0, 0.2, 0.3, 0.5], vec![0.1, 1.0, -0.4, 0.2], vec![0.0, 0.3, 1.0, -0.6]],
            vec![1.0, -0.5, 0.7],
            0.05,
            0.01,
            false,
        )
    }

    #[test]
    fn omp_picks_exact_atom() {
        let mut prob = small();
        let y = prob.a().col(3).to_vec();
        prob = SparseProblem::new(prob.a().clone(), y, 1e-12, vec![0.01; 4], false).unwrap();
        let sol = omp(&prob, 1).unwrap();
        assert_eq!(sol.support(), vec![3]);
        let r = prob.residual(&[3], &[sol.x[3]]);
        assert!(norm2(&r) < 1e-10);
    }

    #[test]
    fn omp_sparsity_bounds() {
        let prob = small();
        assert_eq!(omp(&prob, 0), Err(BaselineError::InvalidSparsity { k: 0, p: 4 }));
        assert!(omp(&prob, 5).is_err());
        // k = p: full ridge least squares
        let full = omp(&prob, 4).unwrap();
        let (_, xs) = g_exact(&prob, &[0, 1, 2, 3]).unwrap();
        for i in 0..4 {
            assert!((full.x[i] - xs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn nnomp_stays_nonnegative() {
        let prob = problem(
            &[vec![1.0, 0.2, 0.3, 0.5], vec![0.1, 1.0, -0.4, 0.2], vec![0.0, 0.3, 1.0, -0.6]],
            vec![-1.0, 0.5, 0.7],
            0.05,
            0.01,
            true,
        );
        let sol = nnomp(&prob, 3).unwrap();
        assert!(sol.x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn cosamp_rejects_nonneg() {
        let prob = small().with_nonneg(true);
        assert_eq!(cosamp(&prob, 1, 10), Err(BaselineError::Unsupported("CoSaMP")));
    }

    #[test]
    fn fista_huge_l1_kills_everything() {
        let prob = small();
        let out = fista_enet(&prob, 1e6, 0.05, 1000, 1e-12).unwrap();
        assert!(out.solution.x.iter().all(|&v| v == 0.0));
        assert!(out.solution.gamma.iter().all(|&g| !g));
        assert!(fista_enet(&prob, -1.0, 0.0, 10, 1e-8).is_err());
    }

    #[test]
    fn brute_force_single_column() {
        let a = Mat::from_rows(&[vec![0.6], vec![0.8]]).unwrap();
        let prob = SparseProblem::new(a.clone(), vec![0.6, 0.8], 0.1, vec![0.5], false).unwrap();
        // g({0}) = 0.1/1.1 + 0.5 > g(empty) = 1
        let (g1, _) = g_exact(&prob, &[0]).unwrap();
        let sol = brute_force(&prob, None).unwrap();
        assert_eq!(sol.support().is_empty(), 1.0 <= g1);
        let prob = SparseProblem::new(a, vec![0.6, 0.8], 0.1, vec![0.2], false).unwrap();
        assert_eq!(brute_force(&prob, None).unwrap().support(), vec![0]);
    }

    #[test]
    fn brute_force_budget() {
        let a = Mat::from_fn(2, 15, |i, j| if (i + j) % 2 == 0 { 1.0 } else { 0.0 });
        let prob = SparseProblem::from_raw(a, vec![1.0, 0.0], 0.1, vec![0.1; 15], false).unwrap().0;
        assert!(matches!(brute_force(&prob, None), Err(BaselineError::TooLarge { p: 15, cap: None })));
        assert!(brute_force(&prob, Some(2)).is_ok());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
    }
}
