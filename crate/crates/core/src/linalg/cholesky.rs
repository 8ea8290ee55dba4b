use super::{dot, LinalgError, Mat};

/// Pivot tolerance shared by full factorization and column insertion.
pub const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Triangle {
    /// Solve `L u = b`.
    Forward,
    /// Solve `L^T x = b`.
    Backward,
}

/// Lower-triangular Cholesky factor `L` of a Gram matrix `G = L L^T`.
///
/// Stored packed by rows: row `i` holds its `i + 1` entries on and below the
/// diagonal. Appending a column (and row) to `G` is then a plain push, and a
/// removal only has to splice out one entry per trailing row.
///
/// The factor carries no knowledge of which original indices its columns
/// stand for; callers map support positions to factor positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CholFactor {
    order: usize,
    packed: Vec<f64>,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl CholFactor {
    pub fn empty() -> Self {
        Self::default()
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_empty(&self) -> bool {
        self.order == 0
    }

    /// Entry `(i, j)`; zero above the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.order && j < self.order, "index out of range");
        if j > i {
            0.0
        } else {
            self.packed[row_start(i) + j]
        }
    }

    /// Row `i` up to and including the diagonal.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.packed[row_start(i)..row_start(i + 1)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(j <= i);
        &mut self.packed[row_start(i) + j]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.packed[row_start(i) + i]
    }

    /// Wraps an explicit lower-triangular matrix. Entries above the diagonal
    /// must be zero and the diagonal strictly positive.
    pub fn from_lower(l: &Mat) -> Result<Self, LinalgError> {
        let n = l.rows();
        if l.cols() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, found: l.cols() });
        }
        let mut packed = Vec::with_capacity(row_start(n));
        for i in 0..n {
            for j in 0..n {
                let v = l[(i, j)];
                if j <= i {
                    packed.push(v);
                } else if v != 0.0 {
                    return Err(LinalgError::NotLowerTriangular { row: i, col: j });
                }
            }
            if !(l[(i, i)] > 0.0) {
                return Err(LinalgError::ZeroDiagonal(i));
            }
        }
        Ok(CholFactor { order: n, packed })
    }

    pub fn to_dense(&self) -> Mat {
        Mat::from_fn(self.order, self.order, |i, j| if j <= i { self.get(i, j) } else { 0.0 })
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> Mat {
        let n = self.order;
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.row(i)[..=j], self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Full factorization of a symmetric positive definite matrix. Only the
    /// lower triangle of `g` is read.
    pub fn factor(g: &Mat) -> Result<Self, LinalgError> {
        let n = g.rows();
        if g.cols() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, found: g.cols() });
        }
        let mut l = CholFactor { order: n, packed: vec![0.0; row_start(n)] };
        for i in 0..n {
            for j in 0..=i {
                let s = g[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
                if i == j {
                    let scale = g[(i, i)];
                    if !(scale > 0.0) || !(s > PIVOT_EPS * scale) {
                        return Err(LinalgError::NotPositiveDefinite { pivot: i, value: s });
                    }
                    *l.at_mut(i, i) = s.sqrt();
                } else {
                    *l.at_mut(i, j) = s / l.diag(j);
                }
            }
        }
        Ok(l)
    }

    fn check_diagonal(&self) -> Result<(), LinalgError> {
        for i in 0..self.order {
            if !(self.diag(i) > 0.0) {
                return Err(LinalgError::ZeroDiagonal(i));
            }
        }
        Ok(())
    }

    /// Forward (`L u = b`) or backward (`L^T x = b`) substitution.
    pub fn tri_solve(&self, b: &[f64], mode: Triangle) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.order {
            return Err(LinalgError::DimensionMismatch { expected: self.order, found: b.len() });
        }
        self.check_diagonal()?;
        let n = self.order;
        let mut x = b.to_vec();
        match mode {
            Triangle::Forward => {
                for i in 0..n {
                    let row = self.row(i);
                    x[i] = (x[i] - dot(&row[..i], &x[..i])) / row[i];
                }
            }
            Triangle::Backward => {
                // Row i of L is column i of L^T: once x_i is final, eliminate it
                // from the equations above.
                for i in (0..n).rev() {
                    let row = self.row(i);
                    x[i] /= row[i];
                    let xi = x[i];
                    for (xj, lij) in x[..i].iter_mut().zip(&row[..i]) {
                        *xj -= lij * xi;
                    }
                }
            }
        }
        Ok(x)
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let u = self.tri_solve(b, Triangle::Forward)?;
        self.tri_solve(&u, Triangle::Backward)
    }

    /// Appends one column to the factored Gram matrix.
    ///
    /// `g` holds the inner products of the new column with the existing ones
    /// and `diag` its squared norm. With `L v = g`, the new last row is
    /// `[v^T, sqrt(diag - v^T v)]`. On error the factor is left unchanged.
    pub fn insert(&mut self, g: &[f64], diag: f64, eps: f64) -> Result<(), LinalgError> {
        if g.len() != self.order {
            return Err(LinalgError::DimensionMismatch { expected: self.order, found: g.len() });
        }
        let v = self.tri_solve(g, Triangle::Forward)?;
        let pivot = diag - dot(&v, &v);
        if !(pivot > eps) {
            return Err(LinalgError::NegativePivot { value: pivot });
        }
        self.packed.extend_from_slice(&v);
        self.packed.push(pivot.sqrt());
        self.order += 1;
        Ok(())
    }

    /// Deletes row and column `pos` from the factored Gram matrix.
    ///
    /// Writing `L` in blocks around `pos`, the leading block and the rows below
    /// it keep their first `pos` columns; the trailing block absorbs the removed
    /// sub-diagonal column through a rank-one update.
    pub fn remove(&mut self, pos: usize) -> Result<(), LinalgError> {
        if pos >= self.order {
            return Err(LinalgError::IndexOutOfRange { index: pos, order: self.order });
        }
        let n = self.order;
        let mut spliced = Vec::with_capacity(row_start(n - 1));
        spliced.extend_from_slice(&self.packed[..row_start(pos)]);
        let mut carried = Vec::with_capacity(n - pos - 1);
        for i in pos + 1..n {
            let row = self.row(i);
            spliced.extend_from_slice(&row[..pos]);
            carried.push(row[pos]);
            spliced.extend_from_slice(&row[pos + 1..]);
        }
        self.packed = spliced;
        self.order = n - 1;
        self.update_trailing(pos, carried);
        Ok(())
    }

    /// Replaces `L` with the factor of `L L^T + u u^T`.
    pub fn rank_one_update(&mut self, u: &[f64]) -> Result<(), LinalgError> {
        if u.len() != self.order {
            return Err(LinalgError::DimensionMismatch { expected: self.order, found: u.len() });
        }
        self.update_trailing(0, u.to_vec());
        Ok(())
    }

    /// Rank-one update of the trailing principal block starting at `start`,
    /// via a sequence of Givens-style rotations.
    fn update_trailing(&mut self, start: usize, mut w: Vec<f64>) {
        let m = self.order - start;
        debug_assert_eq!(w.len(), m);
        for j in 0..m {
            if w[j] == 0.0 {
                continue;
            }
            let jj = start + j;
            let ljj = self.diag(jj);
            let r = ljj.hypot(w[j]);
            let c = r / ljj;
            let s = w[j] / ljj;
            *self.at_mut(jj, jj) = r;
            for k in j + 1..m {
                let lkj = self.at_mut(start + k, jj);
                *lkj = (*lkj + s * w[k]) / c;
                w[k] = c * w[k] - s * *lkj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lower(rows: &[Vec<f64>]) -> CholFactor {
        CholFactor::from_lower(&Mat::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn one_by_one_forward() {
        let l = lower(&[vec![2.0]]);
        assert_eq!(l.tri_solve(&[4.0], Triangle::Forward).unwrap(), vec![2.0]);
    }

    #[test]
    fn identity_solves_are_trivial() {
        let l = CholFactor::factor(&Mat::identity(3)).unwrap();
        let b = [0.3, -1.5, 7.0];
        assert_eq!(l.tri_solve(&b, Triangle::Forward).unwrap(), b.to_vec());
        assert_eq!(l.tri_solve(&b, Triangle::Backward).unwrap(), b.to_vec());
    }

    #[test]
    fn tri_solve_errors() {
        let l = lower(&[vec![2.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(
            l.tri_solve(&[1.0], Triangle::Forward),
            Err(LinalgError::DimensionMismatch { expected: 2, found: 1 })
        );
        let mut corrupt = l.clone();
        *corrupt.at_mut(1, 1) = 0.0;
        assert_eq!(corrupt.tri_solve(&[1.0, 1.0], Triangle::Backward), Err(LinalgError::ZeroDiagonal(1)));
    }

    #[test]
    fn factor_small_cases() {
        let l = CholFactor::factor(&Mat::from_rows(&[vec![4.0]]).unwrap()).unwrap();
        assert_eq!(l.get(0, 0), 2.0);

        let lambda = 0.3;
        let mut g = Mat::identity(4);
        for i in 0..4 {
            g[(i, i)] = 1.0 + lambda;
        }
        let l = CholFactor::factor(&g).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { (1.0f64 + lambda).sqrt() } else { 0.0 };
                assert_eq!(l.get(i, j), expected);
            }
        }
    }

    #[test]
    fn factor_rejects_indefinite() {
        let g = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(CholFactor::factor(&g), Err(LinalgError::NotPositiveDefinite { pivot: 1, .. })));
        let g = Mat::from_rows(&[vec![0.0]]).unwrap();
        assert!(matches!(CholFactor::factor(&g), Err(LinalgError::NotPositiveDefinite { pivot: 0, .. })));
    }

    #[test]
    fn insert_into_empty() {
        let lambda = 0.25;
        let mut l = CholFactor::empty();
        l.insert(&[], 1.0 + lambda, PIVOT_EPS).unwrap();
        assert_eq!(l.order(), 1);
        assert_eq!(l.get(0, 0), (1.0f64 + lambda).sqrt());
    }

    #[test]
    fn insert_last_entry_is_schur_pivot() {
        let mut l = lower(&[vec![1.5, 0.0], vec![0.2, 1.1]]);
        let g = [0.4, -0.3];
        let diag = 1.1;
        let v = l.tri_solve(&g, Triangle::Forward).unwrap();
        l.insert(&g, diag, PIVOT_EPS).unwrap();
        assert_eq!(l.row(2)[..2], v[..]);
        assert_eq!(l.get(2, 2), (diag - dot(&v, &v)).sqrt());
    }

    #[test]
    fn insert_rejects_dependent_column() {
        // Second column identical to the first: Schur complement is zero.
        let mut l = CholFactor::factor(&Mat::from_rows(&[vec![1.0]]).unwrap()).unwrap();
        let before = l.clone();
        assert!(matches!(l.insert(&[1.0], 1.0, PIVOT_EPS), Err(LinalgError::NegativePivot { .. })));
        assert_eq!(l, before);
    }

    #[test]
    fn rank_one_zero_and_unit() {
        let mut l = lower(&[vec![1.2, 0.0, 0.0], vec![0.3, 0.9, 0.0], vec![-0.1, 0.4, 2.0]]);
        let before = l.clone();
        l.rank_one_update(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(l, before);

        let mut l = CholFactor::factor(&Mat::identity(2)).unwrap();
        l.rank_one_update(&[1.0, 0.0]).unwrap();
        assert!((l.get(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(l.get(1, 0), 0.0);
        assert_eq!(l.get(1, 1), 1.0);
    }

    #[test]
    fn remove_edge_positions() {
        let mut l = lower(&[vec![2.0]]);
        l.remove(0).unwrap();
        assert!(l.is_empty());

        let full = lower(&[vec![1.2, 0.0, 0.0], vec![0.3, 0.9, 0.0], vec![-0.1, 0.4, 2.0]]);
        let mut l = full.clone();
        l.remove(2).unwrap();
        assert_eq!(l, lower(&[vec![1.2, 0.0], vec![0.3, 0.9]]));

        assert_eq!(l.remove(2), Err(LinalgError::IndexOutOfRange { index: 2, order: 2 }));
    }
}
