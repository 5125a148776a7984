//! Dense column-major matrices and the small amount of linear algebra the
//! pipeline needs: Gram-Schmidt least squares over an arbitrary inner product
//! and Cholesky solves for normal equations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense `f64` matrix stored column by column.
///
/// Columns are the natural unit here: a column is one variable observed over
/// all samples, and regressions operate on whole columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    /// Builds a matrix from equally long columns.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let ncols = columns.len();
        let nrows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for c in &columns {
            if c.len() != nrows {
                return Err(Error::DimensionMismatch {
                    expected: nrows,
                    got: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Matrix { nrows, ncols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(nrows, ncols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    expected: ncols,
                    got: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.nrows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[col * self.nrows + row] = value;
    }

    #[inline]
    pub fn col(&self, col: usize) -> &[f64] {
        &self.data[col * self.nrows..(col + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, col: usize) -> &mut [f64] {
        &mut self.data[col * self.nrows..(col + 1) * self.nrows]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.ncols).map(|c| self.get(row, c)).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.ncols).map(move |c| self.col(c))
    }

    pub fn into_columns(self) -> Vec<Vec<f64>> {
        if self.nrows == 0 {
            return vec![Vec::new(); self.ncols];
        }
        self.data.chunks(self.nrows).map(<[f64]>::to_vec).collect()
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.ncols != rhs.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: rhs.nrows,
            });
        }
        let mut out = Matrix::zeros(self.nrows, rhs.ncols);
        for j in 0..rhs.ncols {
            for k in 0..self.ncols {
                let b = rhs.get(k, j);
                if b == 0.0 {
                    continue;
                }
                let a = self.col(k);
                for (o, &av) in out.col_mut(j).iter_mut().zip(a) {
                    *o += av * b;
                }
            }
        }
        Ok(out)
    }

    /// Selects a subset of columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.nrows * cols.len());
        for &c in cols {
            data.extend_from_slice(self.col(c));
        }
        Matrix {
            nrows: self.nrows,
            ncols: cols.len(),
            data,
        }
    }
}

/// Inner product used by Gram-Schmidt.
///
/// Sample regressions use the plain Euclidean product over observations.
/// Population regressions over coefficient vectors use a product weighted by
/// the variances of the underlying independent terms.
pub trait InnerProduct {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl InnerProduct for Euclidean {
    #[inline]
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, b)
    }
}

/// `<a, b> = sum_t w_t a_t b_t`.
#[derive(Debug, Clone, Copy)]
pub struct Weighted<'a>(pub &'a [f64]);

impl InnerProduct for Weighted<'_> {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(self.0)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators keep the loop vectorizable
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// `y - W b`.
    pub residual: Vec<f64>,
    /// One coefficient per regressor; dropped regressors get 0.
    pub coefficients: Vec<f64>,
    /// Regressors found linearly dependent on earlier ones, in input order.
    pub dropped: Vec<usize>,
}

/// Relative norm below which a regressor counts as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Regresses `y` on `regressors` without an intercept.
///
/// Uses modified Gram-Schmidt with one reorthogonalization pass, which keeps
/// the residual orthogonal to every regressor to working precision. Columns
/// that are (numerically) spanned by earlier columns are dropped and recorded.
pub fn least_squares<P: InnerProduct>(ip: &P, y: &[f64], regressors: &[&[f64]]) -> LeastSquares {
    let k = regressors.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    // r_cols[m][l] = coefficient of kept regressor m on basis vector l
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut kept = Vec::with_capacity(k);
    let mut dropped = Vec::new();

    for (idx, w) in regressors.iter().enumerate() {
        let norm_w = libm::sqrt(ip.dot(w, w));
        let mut v = w.to_vec();
        let mut coeffs = vec![0.0; basis.len()];
        for _ in 0..2 {
            for (l, q) in basis.iter().enumerate() {
                let c = ip.dot(&v, q);
                axpy(&mut v, -c, q);
                coeffs[l] += c;
            }
        }
        let nv = libm::sqrt(ip.dot(&v, &v));
        if !(norm_w > 0.0) || nv <= RANK_TOLERANCE * norm_w {
            dropped.push(idx);
            continue;
        }
        let inv = 1.0 / nv;
        v.iter_mut().for_each(|x| *x *= inv);
        coeffs.push(nv);
        basis.push(v);
        r_cols.push(coeffs);
        kept.push(idx);
    }

    let mut residual = y.to_vec();
    let mut proj = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (l, q) in basis.iter().enumerate() {
            let c = ip.dot(&residual, q);
            axpy(&mut residual, -c, q);
            proj[l] += c;
        }
    }

    // back substitution on the upper-triangular R
    let m = basis.len();
    let mut beta = vec![0.0; m];
    for l in (0..m).rev() {
        let mut s = proj[l];
        for c in l + 1..m {
            s -= r_cols[c][l] * beta[c];
        }
        beta[l] = s / r_cols[l][l];
    }
    let mut coefficients = vec![0.0; k];
    for (pos, &idx) in kept.iter().enumerate() {
        coefficients[idx] = beta[pos];
    }

    LeastSquares {
        residual,
        coefficients,
        dropped,
    }
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, `k x k`).
///
/// Returns `None` when `A` is not numerically positive definite.
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    debug_assert_eq!(a.len(), k * k);
    let mut l = vec![0.0; k * k];
    let scale = (0..k).map(|i| a[i * k + i].abs()).fold(0.0, f64::max);
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if !(s > 1e-13 * scale.max(1e-300)) {
                    return None;
                }
                l[i * k + i] = libm::sqrt(s);
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut z = vec![0.0; k];
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i * k + p] * z[p];
        }
        z[i] = s / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = z[i];
        for p in i + 1..k {
            s -= l[p * k + i] * x[p];
        }
        x[i] = s / l[i * k + i];
    }
    Some(x)
}
