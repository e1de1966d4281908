//! Small dense linear algebra: row-major matrices, Cholesky, power iteration.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::num;
use crate::{DcError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(DcError::InvalidInput("matrix has no rows".into()));
        }
        let c = rows[0].len();
        if c == 0 {
            return Err(DcError::InvalidInput("matrix has no columns".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(DcError::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DcError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(|r| r.to_vec()).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data.chunks(self.cols).map(|row| num::dot(row, x)).collect()
    }

    /// `A^T y`
    pub fn tmatvec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, yi) in self.data.chunks(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        num::norm_inf(&self.data)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        (0..n).all(|i| (0..i).all(|j| num::abs(self.get(i, j) - self.get(j, i)) <= tol))
    }

    /// Diagonal entries if the matrix is diagonal.
    pub fn diagonal_entries(&self) -> Option<Vec<f64>> {
        if self.rows != self.cols {
            return None;
        }
        let n = self.rows;
        for i in 0..n {
            for j in 0..n {
                if i != j && self.get(i, j) != 0.0 {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.get(i, i)).collect())
    }

    /// Lower-triangular Cholesky factor of `self + shift * I`, or `None` if a
    /// nonpositive pivot appears.
    pub fn cholesky_shifted(&self, shift: f64) -> Option<Cholesky> {
        let n = self.rows;
        if n != self.cols {
            return None;
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                if i == j {
                    s += shift;
                }
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[i * n + i] = num::sqrt(s);
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Cholesky { n, l })
    }

    /// Positive semidefiniteness test by a Cholesky attempt on a slightly
    /// shifted matrix.
    pub fn is_psd(&self) -> bool {
        let n = self.rows as f64;
        let shift = 1e-12 * (1.0 + self.max_abs()) * n.max(1.0);
        self.is_symmetric(1e-12 * (1.0 + self.max_abs())) && self.cholesky_shifted(shift).is_some()
    }

    /// Largest eigenvalue of `A^T A` by power iteration, stopping when the
    /// Rayleigh quotient changes by at most `tol` relative.
    pub fn gram_lambda_max(&self, tol: f64) -> f64 {
        let n = self.cols;
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * libm::sin(1.0 + i as f64))
            .collect();
        let nv = num::norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let w = self.tmatvec(&self.matvec(&v));
            let next = num::dot(&v, &w);
            let nw = num::norm(&w);
            if nw == 0.0 {
                return 0.0;
            }
            v = w.iter().map(|x| x / nw).collect();
            if num::abs(next - lambda) <= tol * num::abs(next) {
                return next.max(lambda);
            }
            lambda = next;
        }
        lambda
    }

    /// Spectral norm `||A||_2`.
    pub fn spectral_norm(&self, tol: f64) -> f64 {
        num::sqrt(self.gram_lambda_max(tol))
    }
}

#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[i * n + k] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        z
    }
}
