//! Problem definition, prior-to-penalty conversion and the exact objective.
//!
//! The objective is
//!
//! ```text
//! ||y - A x||^2 + lambda ||x||^2 + sum_i rho_i gamma_i
//! ```
//!
//! over coefficients `x` and activity indicators `gamma`. Folding the ridge
//! term into an augmented system `D = [A; sqrt(lambda) I]`, `z = [y; 0]` turns
//! the first two terms into `||z - D x||^2`. `D` is never formed here; every
//! augmented inner product is expanded in terms of `A`, `y` and `lambda`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{axpy, dot, norm2, norm2_sq, CholFactor, LinalgError, Mat};

/// Allowed deviation of a column norm from 1 when validating a problem.
pub const UNIT_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("column {0} is zero and cannot be normalized")]
    ZeroColumn(usize),
    #[error("column {col} has norm {norm}, expected 1")]
    NotUnitNorm { col: usize, norm: f64 },
    #[error("lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid prior parameter: {0}")]
    InvalidPrior(String),
    #[error("index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("index {0} appears twice in the support")]
    DuplicateIndex(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A spike-and-slab MAP recovery problem with unit-norm dictionary columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseProblem {
    a: Mat,
    y: Vec<f64>,
    lambda: f64,
    rho: Vec<f64>,
    nonneg: bool,
}

impl SparseProblem {
    /// Validates and wraps a problem whose columns are already unit norm.
    pub fn new(a: Mat, y: Vec<f64>, lambda: f64, rho: Vec<f64>, nonneg: bool) -> Result<Self, ModelError> {
        if y.len() != a.rows() {
            return Err(ModelError::DimensionMismatch { what: "y", expected: a.rows(), found: y.len() });
        }
        if rho.len() != a.cols() {
            return Err(ModelError::DimensionMismatch { what: "rho", expected: a.cols(), found: rho.len() });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ModelError::InvalidLambda(lambda));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("y"));
        }
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("rho"));
        }
        if a.as_col_major().iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("A"));
        }
        for j in 0..a.cols() {
            let norm = norm2(a.col(j));
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(ModelError::NotUnitNorm { col: j, norm });
            }
        }
        Ok(SparseProblem { a, y, lambda, rho, nonneg })
    }

    /// Normalizes the columns of `a_raw` first. Returns the problem and the
    /// original column norms; a coefficient `x_i` of the normalized problem
    /// corresponds to `x_i / scales[i]` in the raw one.
    pub fn from_raw(
        a_raw: Mat,
        y: Vec<f64>,
        lambda: f64,
        rho: Vec<f64>,
        nonneg: bool,
    ) -> Result<(Self, Vec<f64>), ModelError> {
        let (a, scales) = normalize_columns(a_raw)?;
        Ok((SparseProblem::new(a, y, lambda, rho, nonneg)?, scales))
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn nonneg(&self) -> bool {
        self.nonneg
    }

    /// Number of coefficients.
    pub fn p(&self) -> usize {
        self.a.cols()
    }

    /// Number of measurements.
    pub fn q(&self) -> usize {
        self.a.rows()
    }

    pub fn with_nonneg(mut self, nonneg: bool) -> Self {
        self.nonneg = nonneg;
        self
    }

    /// Squared norm of every augmented column, `||a_i||^2 + lambda`.
    pub fn atom_energy(&self) -> f64 {
        1.0 + self.lambda
    }

    /// The full objective for an arbitrary `(x, gamma)`.
    pub fn cost(&self, x: &[f64], gamma: &[bool]) -> Result<f64, ModelError> {
        let p = self.p();
        if x.len() != p {
            return Err(ModelError::DimensionMismatch { what: "x", expected: p, found: x.len() });
        }
        if gamma.len() != p {
            return Err(ModelError::DimensionMismatch { what: "gamma", expected: p, found: gamma.len() });
        }
        let mut r = self.y.clone();
        axpy(-1.0, &self.a.matvec(x), &mut r);
        let penalty: f64 = self.rho.iter().zip(gamma).filter(|(_, &g)| g).map(|(rho, _)| rho).sum();
        Ok(norm2_sq(&r) + self.lambda * norm2_sq(x) + penalty)
    }

    /// `y - A_S x^S`.
    pub fn residual(&self, support: &[usize], xs: &[f64]) -> Vec<f64> {
        let mut r = self.y.clone();
        axpy(-1.0, &self.a.matvec_cols(support, xs), &mut r);
        r
    }

    /// `||z - D_S x^S||^2 + sum_{i in S} rho_i` given the measurement residual.
    pub fn restricted_value(&self, support: &[usize], xs: &[f64], residual: &[f64]) -> f64 {
        let penalty: f64 = support.iter().map(|&i| self.rho[i]).sum();
        norm2_sq(residual) + self.lambda * norm2_sq(xs) + penalty
    }
}

/// Scales every column to unit 2-norm. Returns the scaled matrix and the
/// original norms.
pub fn normalize_columns(mut a: Mat) -> Result<(Mat, Vec<f64>), ModelError> {
    let mut scales = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let col = a.col_mut(j);
        let norm = norm2(col);
        if norm == 0.0 {
            return Err(ModelError::ZeroColumn(j));
        }
        if !norm.is_finite() {
            return Err(ModelError::NonFinite("A"));
        }
        col.iter_mut().for_each(|v| *v /= norm);
        scales.push(norm);
    }
    Ok((a, scales))
}

/// Hyperparameters of the hierarchical prior: noise level, per-index
/// activation probabilities and slab precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    pub sigma: f64,
    pub kappa: Vec<f64>,
    pub lambda: f64,
}

impl PriorParams {
    pub fn uniform(sigma: f64, kappa: f64, lambda: f64, p: usize) -> Self {
        PriorParams { sigma, kappa: vec![kappa; p], lambda }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(ModelError::InvalidPrior(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidPrior(format!("lambda must be positive, got {}", self.lambda)));
        }
        if let Some((i, k)) = self.kappa.iter().enumerate().find(|(_, &k)| !(k > 0.0 && k < 1.0)) {
            return Err(ModelError::InvalidPrior(format!("kappa[{i}] = {k} is outside (0, 1)")));
        }
        Ok(())
    }
}

/// Per-index activation penalty
/// `rho_i = sigma^2 * ln(2 pi sigma^2 (1 - kappa_i)^2 / (lambda kappa_i^2))`.
///
/// Negative whenever `kappa_i` is large enough; such indices belong to every
/// optimal support.
pub fn rho_from_prior(params: &PriorParams) -> Result<Vec<f64>, ModelError> {
    params.validate()?;
    let s2 = params.sigma * params.sigma;
    Ok(params
        .kappa
        .iter()
        .map(|&k| {
            let ratio = (1.0 - k) / k;
            s2 * (2.0 * std::f64::consts::PI * s2 * ratio * ratio / params.lambda).ln()
        })
        .collect())
}

/// Ordered active set. Insertion order is the column order of the matching
/// Cholesky factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    order: Vec<usize>,
    member: Vec<bool>,
}

impl Support {
    pub fn empty(p: usize) -> Self {
        Support { order: Vec::new(), member: vec![false; p] }
    }

    pub fn from_indices(p: usize, indices: &[usize]) -> Result<Self, ModelError> {
        let mut s = Support::empty(p);
        for &i in indices {
            if i >= p {
                return Err(ModelError::IndexOutOfRange { index: i, p });
            }
            if s.member[i] {
                return Err(ModelError::DuplicateIndex(i));
            }
            s.insert(i);
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Size of the index universe.
    pub fn universe(&self) -> usize {
        self.member.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.order
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.member[i]
    }

    pub fn membership(&self) -> &[bool] {
        &self.member
    }

    pub fn position(&self, i: usize) -> Option<usize> {
        if !self.member[i] {
            return None;
        }
        self.order.iter().position(|&j| j == i)
    }

    /// Appends `i`; panics if already present.
    pub fn insert(&mut self, i: usize) -> usize {
        assert!(!self.member[i], "index {i} already in support");
        self.member[i] = true;
        self.order.push(i);
        self.order.len() - 1
    }

    /// Removes the entry at `pos` and returns its index.
    pub fn remove_at(&mut self, pos: usize) -> usize {
        let i = self.order.remove(pos);
        self.member[i] = false;
        i
    }

    /// Indices in ascending order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.order.clone();
        v.sort_unstable();
        v
    }
}

/// A candidate `(x, gamma)` with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub gamma: Vec<bool>,
    pub cost: f64,
}

impl Solution {
    /// Scatters restricted coefficients into a full solution with `gamma`
    /// taken from the support.
    pub fn from_support(prob: &SparseProblem, support: &[usize], xs: &[f64]) -> Result<Self, ModelError> {
        let p = prob.p();
        let mut x = vec![0.0; p];
        let mut gamma = vec![false; p];
        for (&i, &v) in support.iter().zip(xs) {
            if i >= p {
                return Err(ModelError::IndexOutOfRange { index: i, p });
            }
            x[i] = v;
            gamma[i] = true;
        }
        let cost = prob.cost(&x, &gamma)?;
        Ok(Solution { x, gamma, cost })
    }

    /// `gamma` marks exactly the nonzero coefficients.
    pub fn from_dense(prob: &SparseProblem, x: Vec<f64>) -> Result<Self, ModelError> {
        let gamma: Vec<bool> = x.iter().map(|&v| v != 0.0).collect();
        let cost = prob.cost(&x, &gamma)?;
        Ok(Solution { x, gamma, cost })
    }

    pub fn support(&self) -> Vec<usize> {
        self.gamma.iter().enumerate().filter(|(_, &g)| g).map(|(i, _)| i).collect()
    }
}

/// Objective value of `sol` under `prob`.
pub fn cost(prob: &SparseProblem, sol: &Solution) -> Result<f64, ModelError> {
    prob.cost(&sol.x, &sol.gamma)
}

/// Exact restricted objective
/// `g(S) = min_{x^S} ||z - D_S x^S||^2 + sum_{i in S} rho_i`,
/// minimized over `x^S >= 0` when the problem is non-negative.
///
/// Returns the value and the minimizer in the order of `support`.
pub fn g_exact(prob: &SparseProblem, support: &[usize]) -> Result<(f64, Vec<f64>), ModelError> {
    let p = prob.p();
    for (n, &i) in support.iter().enumerate() {
        if i >= p {
            return Err(ModelError::IndexOutOfRange { index: i, p });
        }
        if support[..n].contains(&i) {
            return Err(ModelError::DuplicateIndex(i));
        }
    }
    if support.is_empty() {
        return Ok((norm2_sq(prob.y()), Vec::new()));
    }
    let gram = prob.a().gram_of(support, prob.lambda());
    let w: Vec<f64> = support.iter().map(|&i| dot(prob.a().col(i), prob.y())).collect();
    let xs = if prob.nonneg() {
        nnls_active_set(&gram, &w)?
    } else {
        CholFactor::factor(&gram)?.solve(&w)?
    };
    // Evaluate in ascending index order so the value is bitwise identical to
    // `cost` of the scattered solution.
    let mut pairs: Vec<(usize, f64)> = support.iter().copied().zip(xs.iter().copied()).collect();
    pairs.sort_unstable_by_key(|&(i, _)| i);
    let (sorted, sorted_x): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
    let r = prob.residual(&sorted, &sorted_x);
    Ok((prob.restricted_value(&sorted, &sorted_x, &r), xs))
}

/// Inner product of column `i` of the augmented dictionary with the augmented
/// residual `z - D_S x^S`, given the measurement residual `r = y - A_S x^S`.
///
/// For `i` outside the support this is `r^T a_i`; for `i` in the support the
/// lower block contributes `-lambda x_i`.
pub fn residual_corr(prob: &SparseProblem, support: &Support, xs: &[f64], r: &[f64], i: usize) -> f64 {
    let c = dot(prob.a().col(i), r);
    match support.position(i) {
        Some(pos) => c - prob.lambda() * xs[pos],
        None => c,
    }
}

/// Exact non-negative minimizer of `x^T G x - 2 w^T x` for SPD `G`
/// (Lawson-Hanson active set method in Gram form).
pub fn nnls_active_set(gram: &Mat, w: &[f64]) -> Result<Vec<f64>, ModelError> {
    let n = w.len();
    if gram.rows() != n || gram.cols() != n {
        return Err(ModelError::DimensionMismatch { what: "gram", expected: n, found: gram.rows() });
    }
    let scale = (0..n).map(|i| gram[(i, i)]).fold(0.0, f64::max).max(crate::linalg::max_abs(w));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];

    let solve_passive = |passive: &[bool]| -> Result<Vec<f64>, ModelError> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let sub = Mat::from_fn(idx.len(), idx.len(), |a, b| gram[(idx[a], idx[b])]);
        let rhs: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
        let zs = CholFactor::factor(&sub)?.solve(&rhs)?;
        let mut z = vec![0.0; n];
        for (&i, v) in idx.iter().zip(zs) {
            z[i] = v;
        }
        Ok(z)
    };

    for _ in 0..3 * n + 10 {
        let grad: Vec<f64> = (0..n).map(|i| w[i] - dot_row(gram, i, &x)).collect();
        let Some(j) = (0..n).filter(|&i| !passive[i] && grad[i] > tol).max_by(|&a, &b| grad[a].total_cmp(&grad[b]))
        else {
            break;
        };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive)?;
            if (0..n).filter(|&i| passive[i]).all(|i| z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in (0..n).filter(|&i| passive[i] && z[i] <= 0.0) {
                alpha = alpha.min(x[i] / (x[i] - z[i]));
            }
            for i in 0..n {
                x[i] += alpha * (z[i] - x[i]);
            }
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&b| b) {
                break;
            }
        }
    }
    Ok(x)
}

fn dot_row(m: &Mat, i: usize, x: &[f64]) -> f64 {
    (0..m.cols()).map(|j| m[(i, j)] * x[j]).sum()
}
