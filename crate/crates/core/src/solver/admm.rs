use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm2, CholFactor, LinalgError, Mat};

/// Tunables for the non-negative least-squares ADMM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Augmented Lagrangian penalty `mu`.
    pub penalty: f64,
    pub max_iter: usize,
    /// Bound on both the primal and the dual residual norm.
    pub tol: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig { penalty: 1.0, max_iter: 500, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iter` was hit before both residuals met `tol`.
    pub converged: bool,
}

/// `0.5 x^T G x - w^T x`
fn quad_objective(gram: &Mat, w: &[f64], x: &[f64]) -> f64 {
    let gx = gram.matvec(x);
    0.5 * dot(x, &gx) - dot(w, x)
}

/// Minimizes `0.5 x^T G x - w^T x` over `x >= 0` for SPD `G`.
///
/// Splits `x = v` with the orthant indicator on `v`. Each x-update solves
/// `(G + mu I) x = w + mu (v - u)` against one factorization of `G + mu I`.
/// The returned point is always feasible: the last `v` iterate, or the
/// projected warm start if that scores better.
pub fn nnls_admm(gram: &Mat, w: &[f64], cfg: &AdmmConfig, warm: Option<&[f64]>) -> Result<AdmmOutcome, LinalgError> {
    let n = w.len();
    if gram.rows() != n || gram.cols() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: gram.rows() });
    }
    if n == 0 {
        return Ok(AdmmOutcome { x: Vec::new(), iterations: 0, converged: true });
    }
    let mu = cfg.penalty;
    let mut shifted = gram.clone();
    for i in 0..n {
        shifted[(i, i)] += mu;
    }
    let k = CholFactor::factor(&shifted)?;

    let start: Vec<f64> = match warm {
        Some(x0) if x0.len() == n => x0.iter().map(|&v| v.max(0.0)).collect(),
        _ => vec![0.0; n],
    };
    let mut v = start.clone();
    let mut u = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        iterations += 1;
        for i in 0..n {
            rhs[i] = w[i] + mu * (v[i] - u[i]);
        }
        let x = k.solve(&rhs)?;
        let mut primal = 0.0;
        let mut dual = 0.0;
        for i in 0..n {
            let v_new = (x[i] + u[i]).max(0.0);
            dual += (v_new - v[i]).powi(2);
            primal += (x[i] - v_new).powi(2);
            u[i] += x[i] - v_new;
            v[i] = v_new;
        }
        if primal.sqrt() <= cfg.tol && mu * dual.sqrt() <= cfg.tol {
            converged = true;
            break;
        }
    }

    let x = if quad_objective(gram, w, &start) < quad_objective(gram, w, &v) { start } else { v };
    debug_assert!(norm2(&x).is_finite());
    Ok(AdmmOutcome { x, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaled_identity(n: usize, s: f64) -> Mat {
        let mut g = Mat::identity(n);
        for i in 0..n {
            g[(i, i)] = s;
        }
        g
    }

    #[test]
    fn inactive_constraint_is_plain_division() {
        let lambda = 0.2;
        let g = scaled_identity(3, 1.0 + lambda);
        let w = [0.5, 1.0, 2.0];
        let out = nnls_admm(&g, &w, &AdmmConfig::default(), None).unwrap();
        assert!(out.converged);
        for (x, w) in out.x.iter().zip(w) {
            assert!((x - w / (1.0 + lambda)).abs() < 1e-8);
        }
    }

    #[test]
    fn negative_target_projects_to_zero() {
        let g = scaled_identity(1, 1.1);
        let out = nnls_admm(&g, &[-1.0], &AdmmConfig::default(), None).unwrap();
        assert_eq!(out.x, vec![0.0]);
    }

    #[test]
    fn empty_problem() {
        let out = nnls_admm(&Mat::zeros(0, 0), &[], &AdmmConfig::default(), None).unwrap();
        assert!(out.x.is_empty() && out.converged);
    }

    #[test]
    fn warm_start_is_never_worse() {
        let g = Mat::from_rows(&[vec![2.0, 0.9], vec![0.9, 1.0]]).unwrap();
        let w = [1.0, 0.2];
        let cfg = AdmmConfig { max_iter: 1, ..AdmmConfig::default() };
        let exact = crate::model::nnls_active_set(&g, &w).unwrap();
        let out = nnls_admm(&g, &w, &cfg, Some(&exact)).unwrap();
        assert!(quad_objective(&g, &w, &out.x) <= quad_objective(&g, &w, &exact));
        assert!(!out.converged);
    }
}
