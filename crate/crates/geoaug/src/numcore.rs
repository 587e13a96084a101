//! Dense symmetric linear algebra shared by the GP and kriging solvers.
//!
//! Problem sizes stay small (a few hundred to ~1100 points), so everything
//! here is a plain dense implementation: Cholesky factorization with a
//! deterministic jitter-escalation schedule, triangular solves, the
//! log-determinant, and a partially pivoted Gaussian-elimination solver that
//! doubles as the independent oracle for the SPD path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{s, Scalar};

/// Relative symmetry tolerance accepted by [`SymmetricMatrix::new`].
const SYMMETRY_RTOL: f64 = 1e-12;

/// Default jitter escalation schedule, as multiples of `trace(A)/n`.
pub const DEFAULT_JITTER_SCHEDULE: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

#[derive(Debug, Error)]
pub enum NumError {
    #[error("matrix is not positive definite (jitter escalated to {max_jitter:e} without success)")]
    NotPositiveDefinite { max_jitter: f64 },
    #[error("matrix is singular to working precision at pivot column {pivot_col}")]
    Singular { pivot_col: usize },
    #[error("matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:e} exceeds tolerance")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("non-finite entry at ({i},{j})")]
    NonFinite { i: usize, j: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == n_cols),
            "ragged rows in Matrix::from_rows"
        );
        Matrix {
            rows: n_rows,
            cols: n_cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// Max-abs norm over all entries.
    pub fn norm_inf(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// A validated symmetric matrix with finite entries.
#[derive(Debug, Clone)]
pub struct SymmetricMatrix<T>(Matrix<T>);

impl<T: Scalar> SymmetricMatrix<T> {
    /// Validates symmetry to `1e-12` relative and finiteness of every entry.
    pub fn new(m: Matrix<T>) -> Result<Self, NumError> {
        assert_eq!(m.n_rows(), m.n_cols(), "symmetric matrix must be square");
        let scale = m.norm_inf().max(T::one());
        let rtol = s::<T>(SYMMETRY_RTOL) * scale;
        for i in 0..m.n_rows() {
            for j in 0..=i {
                let a = m[(i, j)];
                let b = m[(j, i)];
                if !a.is_finite() || !b.is_finite() {
                    return Err(NumError::NonFinite { i, j });
                }
                let diff = (a - b).abs();
                if diff > rtol {
                    return Err(NumError::NotSymmetric {
                        i,
                        j,
                        diff: diff.to_f64_lossy(),
                    });
                }
            }
        }
        Ok(SymmetricMatrix(m))
    }

    /// Builds from the lower triangle of `f`, mirroring to guarantee symmetry.
    pub fn from_fn_symmetric(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymmetricMatrix(m)
    }

    pub fn n(&self) -> usize {
        self.0.n_rows()
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.0
    }
}

/// Jitter escalation schedule: each multiplier scales `trace(A)/n`.
#[derive(Debug, Clone)]
pub struct JitterPolicy {
    pub multipliers: Vec<f64>,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            multipliers: DEFAULT_JITTER_SCHEDULE.to_vec(),
        }
    }
}

impl JitterPolicy {
    /// No jitter at all: factorization either succeeds exactly or fails.
    pub fn none() -> Self {
        JitterPolicy {
            multipliers: vec![0.0],
        }
    }
}

/// Lower-triangular Cholesky factor of `A + jitter*I`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor<T> {
    l: Matrix<T>,
    /// The jitter that was actually added to the diagonal.
    pub jitter: T,
}

impl<T: Scalar> CholeskyFactor<T> {
    pub fn n(&self) -> usize {
        self.l.n_rows()
    }

    pub fn l(&self) -> &Matrix<T> {
        &self.l
    }

    /// Solves `L x = b` in place.
    fn forward_sub(&self, b: &mut [T]) {
        let n = self.n();
        for i in 0..n {
            let row = self.l.row(i);
            let mut acc = b[i];
            for k in 0..i {
                acc -= row[k] * b[k];
            }
            b[i] = acc / row[i];
        }
    }

    /// Solves `L^T x = b` in place.
    fn backward_sub(&self, b: &mut [T]) {
        let n = self.n();
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in (i + 1)..n {
                acc -= self.l[(k, i)] * b[k];
            }
            b[i] = acc / self.l[(i, i)];
        }
    }

    /// Solves `(A + jitter*I) x = b`.
    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n(), "solve_vec dimension mismatch");
        let mut x = b.to_vec();
        self.forward_sub(&mut x);
        self.backward_sub(&mut x);
        x
    }

    /// Solves `(A + jitter*I) X = B` column by column.
    pub fn solve_mat(&self, b: &Matrix<T>) -> Matrix<T> {
        assert_eq!(b.n_rows(), self.n(), "solve_mat dimension mismatch");
        let n = self.n();
        let m = b.n_cols();
        let mut out = Matrix::zeros(n, m);
        let mut col = vec![T::zero(); n];
        for j in 0..m {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            self.forward_sub(&mut col);
            self.backward_sub(&mut col);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    /// `log det(A + jitter*I) = 2 * sum(log L_ii)`.
    pub fn log_det(&self) -> T {
        let two = s::<T>(2.0);
        (0..self.n())
            .map(|i| self.l[(i, i)].ln())
            .sum::<T>()
            * two
    }

    /// Explicit inverse of `A + jitter*I`, via `L^-1` then `L^-T L^-1`.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.n();
        // invert L in place (lower triangular)
        let mut linv = Matrix::zeros(n, n);
        for j in 0..n {
            linv[(j, j)] = T::one() / self.l[(j, j)];
            for i in (j + 1)..n {
                let mut acc = T::zero();
                for k in j..i {
                    acc += self.l[(i, k)] * linv[(k, j)];
                }
                linv[(i, j)] = -acc / self.l[(i, i)];
            }
        }
        // K^-1 = L^-T L^-1, symmetric; fill lower and mirror
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = T::zero();
                // sum over k >= max(i,j): linv[(k,i)] * linv[(k,j)]
                for k in i..n {
                    acc += linv[(k, i)] * linv[(k, j)];
                }
                inv[(i, j)] = acc;
                inv[(j, i)] = acc;
            }
        }
        inv
    }
}

/// Cholesky factorization with jitter escalation.
///
/// Attempts `L L^T = A + lambda I` for each `lambda` in
/// `policy.multipliers * trace(A)/n`, keeping the first success. The jitter
/// actually used is reported on the returned factor.
pub fn cholesky<T: Scalar>(
    a: &SymmetricMatrix<T>,
    policy: &JitterPolicy,
) -> Result<CholeskyFactor<T>, NumError> {
    let n = a.n();
    let base = if n == 0 {
        T::zero()
    } else {
        a.as_matrix().trace() / s::<T>(n as f64)
    };
    let mut max_tried = 0.0f64;
    for &mult in &policy.multipliers {
        let jitter = s::<T>(mult) * base;
        max_tried = mult * base.to_f64_lossy();
        if let Some(l) = try_cholesky(a.as_matrix(), jitter) {
            return Ok(CholeskyFactor { l, jitter });
        }
    }
    Err(NumError::NotPositiveDefinite {
        max_jitter: max_tried,
    })
}

fn try_cholesky<T: Scalar>(a: &Matrix<T>, jitter: T) -> Option<Matrix<T>> {
    let n = a.n_rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = a[(i, j)];
            if i == j {
                acc += jitter;
            }
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if acc <= T::zero() || !acc.is_finite() {
                    return None;
                }
                l[(i, j)] = acc.sqrt();
            } else {
                l[(i, j)] = acc / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves an SPD system through Cholesky with the default jitter policy.
pub fn solve_spd<T: Scalar>(a: &SymmetricMatrix<T>, b: &[T]) -> Result<Vec<T>, NumError> {
    if b.len() != a.n() {
        return Err(NumError::DimensionMismatch(format!(
            "rhs has {} entries for a {0}x{1} system",
            b.len(),
            a.n()
        )));
    }
    let factor = cholesky(a, &JitterPolicy::default())?;
    Ok(factor.solve_vec(b))
}

/// Solves a general square system by Gaussian elimination with partial
/// pivoting. Used directly for the ordinary-kriging bordered system (which is
/// symmetric indefinite) and as the independent oracle for the SPD path.
pub fn solve_general<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>, NumError> {
    let n = a.n_rows();
    assert_eq!(a.n_cols(), n, "solve_general needs a square matrix");
    if b.len() != n {
        return Err(NumError::DimensionMismatch(format!(
            "rhs has {} entries for a {n}x{n} system",
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.norm_inf().max(T::one());
    let pivot_tol = scale * s::<T>(1e-14);

    for col in 0..n {
        // partial pivot
        let mut best = col;
        let mut best_abs = m[(col, col)].abs();
        for r in (col + 1)..n {
            let v = m[(r, col)].abs();
            if v > best_abs {
                best_abs = v;
                best = r;
            }
        }
        if best_abs <= pivot_tol {
            return Err(NumError::Singular { pivot_col: col });
        }
        if best != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(best, j)];
                m[(best, j)] = tmp;
            }
            x.swap(col, best);
        }
        let pivot = m[(col, col)];
        for r in (col + 1)..n {
            let factor = m[(r, col)] / pivot;
            if factor == T::zero() {
                continue;
            }
            m[(r, col)] = T::zero();
            for j in (col + 1)..n {
                let v = m[(col, j)];
                m[(r, j)] = m[(r, j)] - factor * v;
            }
            x[r] = x[r] - factor * x[col];
        }
    }
    // back substitution
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= m[(i, j)] * x[j];
        }
        x[i] = acc / m[(i, i)];
    }
    Ok(x)
}
