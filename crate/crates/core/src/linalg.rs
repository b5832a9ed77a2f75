//! Minimal dense row-major matrix; the engine only needs small mat-vec work.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidParameter("matrix has no rows".into()));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter(
                "matrix rows must be non-empty and of equal length".into(),
            ));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self {
            rows: n,
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = dot(self.row(r), x);
        }
    }

    /// Sum of all rows.
    pub fn row_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (acc, v) in s.iter_mut().zip(self.row(r)) {
                *acc += v;
            }
        }
        s
    }

    /// Σ = M Mᵀ.
    pub fn gram(&self) -> Matrix {
        let n = self.rows;
        let mut data = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                data[a * n + b] = dot(self.row(a), self.row(b));
            }
        }
        Matrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|r| ((r + 1)..self.cols).all(|c| self.get(r, c) == 0.0))
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
