//! Small dense row-major matrices and direct linear solves.
//!
//! `solve` factors symmetric positive definite systems with Cholesky and
//! falls back to LU with partial pivoting otherwise. One step of iterative
//! refinement follows either factorization.

use std::fmt;
use std::io::Write;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pivot-ratio bound above which a system is reported singular.
pub const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular or too ill-conditioned (estimate {estimate:e})")]
    Singular { estimate: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: i / cols.max(1),
                col: i % cols.max(1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self + c * I`.
    pub fn add_scaled_identity(&self, c: f64) -> Result<DenseMatrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            out[(i, i)] += c;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(LinalgError::DimensionMismatch("subtraction".into()));
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..i).all(|j| {
                    let (a, b) = (self[(i, j)], self[(j, i)]);
                    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
                })
            })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

enum Factor {
    /// Lower-triangular L with A = L L^T.
    Cholesky(DenseMatrix),
    /// Packed LU (unit lower) and the row permutation.
    Lu(DenseMatrix, Vec<usize>),
}

fn cholesky(a: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

fn lu(a: &DenseMatrix) -> (DenseMatrix, Vec<usize>) {
    let n = a.rows;
    let mut m = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs()))
            .unwrap_or(k);
        if p != k {
            for c in 0..n {
                m.data.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
        }
        let pivot = m[(k, k)];
        if pivot == 0.0 {
            continue;
        }
        for i in k + 1..n {
            let f = m[(i, k)] / pivot;
            m[(i, k)] = f;
            for c in k + 1..n {
                m[(i, c)] -= f * m[(k, c)];
            }
        }
    }
    (m, perm)
}

fn pivot_ratio(diag: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
        (lo.min(d.abs()), hi.max(d.abs()))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn factor(a: &DenseMatrix) -> Result<Factor, LinalgError> {
    let n = a.rows;
    if a.is_symmetric(1e-12) {
        if let Some(l) = cholesky(a) {
            let ratio = pivot_ratio((0..n).map(|i| l[(i, i)])).powi(2);
            if ratio > MAX_CONDITION {
                return Err(LinalgError::Singular { estimate: ratio });
            }
            return Ok(Factor::Cholesky(l));
        }
    }
    let (m, perm) = lu(a);
    let ratio = pivot_ratio((0..n).map(|i| m[(i, i)]));
    if ratio > MAX_CONDITION || ratio.is_nan() {
        return Err(LinalgError::Singular { estimate: ratio });
    }
    Ok(Factor::Lu(m, perm))
}

fn apply(f: &Factor, b: &DenseMatrix) -> DenseMatrix {
    let n = b.rows;
    let mut x = DenseMatrix::zeros(n, b.cols);
    for col in 0..b.cols {
        let mut y: Vec<f64> = match f {
            Factor::Cholesky(_) => b.column(col),
            Factor::Lu(_, perm) => perm.iter().map(|&p| b[(p, col)]).collect(),
        };
        match f {
            Factor::Cholesky(l) => {
                for i in 0..n {
                    let mut s = y[i];
                    for k in 0..i {
                        s -= l[(i, k)] * y[k];
                    }
                    y[i] = s / l[(i, i)];
                }
                for i in (0..n).rev() {
                    let mut s = y[i];
                    for k in i + 1..n {
                        s -= l[(k, i)] * y[k];
                    }
                    y[i] = s / l[(i, i)];
                }
            }
            Factor::Lu(m, _) => {
                for i in 0..n {
                    for k in 0..i {
                        y[i] -= m[(i, k)] * y[k];
                    }
                }
                for i in (0..n).rev() {
                    let mut s = y[i];
                    for k in i + 1..n {
                        s -= m[(i, k)] * y[k];
                    }
                    y[i] = s / m[(i, i)];
                }
            }
        }
        for (r, v) in y.into_iter().enumerate() {
            x[(r, col)] = v;
        }
    }
    x
}

/// Solves `A X = B` for `X`.
pub fn solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if a.rows != b.rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "A is {}x{}, B has {} rows",
            a.rows, a.cols, b.rows
        )));
    }
    let f = factor(a)?;
    let mut x = apply(&f, b);
    let residual = b.sub(&a.matmul(&x)?)?;
    let correction = apply(&f, &residual);
    for (v, d) in x.data.iter_mut().zip(&correction.data) {
        *v += d;
    }
    if let Some(i) = x.data.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite {
            row: i / x.cols.max(1),
            col: i % x.cols.max(1),
        });
    }
    Ok(x)
}
