//! Dense row-major matrices and a Cholesky solver for the SPD systems the
//! harmonic solver produces.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Misaligned("ragged matrix rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Lower-triangular factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    // row-major, only the lower triangle is meaningful
    factor: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric positive-definite matrix; only the lower
    /// triangle of `a` is read.
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::Misaligned("Cholesky needs a square matrix".into()));
        }
        let mut l = vec![T::zero(); n * n];
        for i in 0..n {
            let (done, rest) = l.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..=i {
                let row_j: &[T] = if j == i { &row_i[..] } else { &done[j * n..j * n + n] };
                let dot = dot(&row_i[..j], &row_j[..j]);
                let v = a.get(i, j) - dot;
                if j == i {
                    if !(v > T::zero()) || !v.is_finite() {
                        return Err(Error::Numerical(format!("matrix is not positive definite (pivot {i} = {v})")));
                    }
                    row_i[i] = v.sqrt();
                } else {
                    row_i[j] = v / done[j * n + j];
                }
            }
        }
        Ok(Self { n, factor: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let row = &self.factor[i * n..i * n + n];
            let s = dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
        for i in (0..n).rev() {
            let mut s = T::zero();
            for k in (i + 1)..n {
                s += self.factor[k * n + i] * b[k];
            }
            b[i] = (b[i] - s) / self.factor[i * n + i];
        }
    }
}

/// Solves a general square system by Gaussian elimination with partial
/// pivoting. Used by oracles as a route independent of the Cholesky path.
pub fn gauss_solve<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::Misaligned("gauss_solve needs a square system".into()));
    }
    let mut a = a.clone();
    let mut x = b.clone();
    let scale = a.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a.get(i, k).abs().partial_cmp(&a.get(j, k).abs()).expect("finite"))
            .expect("non-empty range");
        if a.get(pivot, k).abs() <= scale * T::epsilon() * T::from_count(n as u64) {
            return Err(Error::Numerical(format!("singular matrix at column {k}")));
        }
        if pivot != k {
            for j in 0..n {
                let t = a.get(k, j);
                a.set(k, j, a.get(pivot, j));
                a.set(pivot, j, t);
            }
            for j in 0..x.cols() {
                let t = x.get(k, j);
                x.set(k, j, x.get(pivot, j));
                x.set(pivot, j, t);
            }
        }
        for i in (k + 1)..n {
            let f = a.get(i, k) / a.get(k, k);
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                a.set(i, j, a.get(i, j) - f * a.get(k, j));
            }
            for j in 0..x.cols() {
                x.set(i, j, x.get(i, j) - f * x.get(k, j));
            }
        }
    }
    for i in (0..n).rev() {
        for j in 0..x.cols() {
            let mut s = x.get(i, j);
            for k in (i + 1)..n {
                s -= a.get(i, k) * x.get(k, j);
            }
            x.set(i, j, s / a.get(i, i));
        }
    }
    Ok(x)
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // four accumulators keep the loop vectorizable
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = c * 4;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in chunks * 4..a.len() {
        s += a[k] * b[k];
    }
    s
}
