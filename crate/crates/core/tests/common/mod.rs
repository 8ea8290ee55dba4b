#![allow(dead_code)]

use amp_core::{Mat, SparseProblem};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Random instance with unit-norm columns and `k` planted coefficients.
pub fn planted(
    rng: &mut ChaCha8Rng,
    q: usize,
    p: usize,
    k: usize,
    sigma: f64,
    lambda: f64,
    rho: Vec<f64>,
    nonneg: bool,
) -> (SparseProblem, Vec<f64>) {
    let (a, _) = amp_core::model::normalize_columns(gaussian_mat(rng, q, p)).unwrap();
    let mut x0 = vec![0.0; p];
    for i in sample(rng, p, k) {
        let v = gaussian(rng);
        x0[i] = if nonneg { v.abs() } else { v };
    }
    let mut y = a.matvec(&x0);
    for v in &mut y {
        *v += sigma * gaussian(rng);
    }
    (SparseProblem::new(a, y, lambda, rho, nonneg).unwrap(), x0)
}

pub fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Dense solve of `G x = b` through nalgebra's LU.
pub fn dense_solve(g: &Mat, b: &[f64]) -> Vec<f64> {
    let lu = to_na(g).lu();
    lu.solve(&DVector::from_column_slice(b)).expect("nonsingular").iter().copied().collect()
}

/// Unit-norm random columns, returned as a problem-free matrix.
pub fn unit_columns(rng: &mut ChaCha8Rng, q: usize, p: usize) -> Mat {
    amp_core::model::normalize_columns(gaussian_mat(rng, q, p)).unwrap().0
}

/// Ridge least squares on `support` plus penalty, computed with nalgebra.
pub fn dense_g(prob: &SparseProblem, support: &[usize]) -> f64 {
    let y = DVector::from_column_slice(prob.y());
    if support.is_empty() {
        return y.norm_squared();
    }
    let a_s = DMatrix::from_fn(prob.q(), support.len(), |i, j| prob.a()[(i, support[j])]);
    let gram = a_s.transpose() * &a_s + DMatrix::identity(support.len(), support.len()) * prob.lambda();
    let w = a_s.transpose() * &y;
    let x = gram.lu().solve(&w).unwrap();
    let r = &y - &a_s * &x;
    r.norm_squared() + prob.lambda() * x.norm_squared() + support.iter().map(|&i| prob.rho()[i]).sum::<f64>()
}

/// All subsets of `0..p` with at most `max` elements.
pub fn subsets_up_to(p: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&l: &usize| l + 1);
            for i in start..p {
                let mut t: Vec<usize> = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
