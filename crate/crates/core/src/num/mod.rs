//! Dense f64 linear algebra just large enough for this crate.
//!
//! Everything is row-major, heap-backed, and deterministic: no SIMD
//! dispatch, no threading, accumulation order fixed by the loops below.
//! Dimension violations surface as [`NumError::Shape`] instead of panics so
//! callers can attribute failures to inputs.

pub mod tape;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from the numeric layer.
#[derive(Debug, Error)]
pub enum NumError {
    /// Operand dimensions do not line up for the named operation.
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },
    /// An operation-specific precondition was violated.
    #[error("{op}: contract violation ({detail})")]
    Contract { op: &'static str, detail: String },
    /// A non-finite value crossed a checked boundary.
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
}

fn shape_err(op: &'static str, detail: String) -> NumError {
    NumError::Shape { op, detail }
}

/// Dense f64 vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn zeros(len: usize) -> Self {
        Vector { data: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Dot product; lengths must match.
    pub fn dot(&self, other: &Vector) -> Result<f64, NumError> {
        if self.len() != other.len() {
            return Err(shape_err(
                "dot",
                format!("lhs len {} vs rhs len {}", self.len(), other.len()),
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Elementwise sum; lengths must match.
    pub fn add(&self, other: &Vector) -> Result<Vector, NumError> {
        if self.len() != other.len() {
            return Err(shape_err(
                "add",
                format!("lhs len {} vs rhs len {}", self.len(), other.len()),
            ));
        }
        Ok(Vector::new(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    /// Every component multiplied by `k`.
    pub fn scale(&self, k: f64) -> Vector {
        Vector::new(self.data.iter().map(|a| a * k).collect())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    /// True when every component is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector::new(data)
    }
}

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data; `data.len()` must be
    /// `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(shape_err(
                "Matrix::new",
                format!("{}x{} needs {} entries, got {}", rows, cols, rows * cols, data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a matrix by evaluating `f(row, col)` for every entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self · v`; `v.len()` must equal `self.cols`.
    pub fn matvec(&self, v: &Vector) -> Result<Vector, NumError> {
        if v.len() != self.cols {
            return Err(shape_err(
                "matvec",
                format!("matrix is {}x{}, vector len {}", self.rows, self.cols, v.len()),
            ));
        }
        let mut out = vec![0.0; self.rows];
        for (i, out_i) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(v.as_slice()) {
                acc += a * b;
            }
            *out_i = acc;
        }
        Ok(Vector::new(out))
    }

    /// `selfᵀ · v` without materializing the transpose; `v.len()` must equal
    /// `self.rows`.
    pub fn matvec_transpose(&self, v: &Vector) -> Result<Vector, NumError> {
        if v.len() != self.rows {
            return Err(shape_err(
                "matvec_transpose",
                format!("matrix is {}x{}, vector len {}", self.rows, self.cols, v.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let vi = v[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += vi * a;
            }
        }
        Ok(Vector::new(out))
    }

    /// `self · other`; inner dimensions must match.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, NumError> {
        if self.cols != other.rows {
            return Err(shape_err(
                "matmul",
                format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let other_row = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Rank-1 update `self += k · u vᵀ`.
    pub fn add_outer(&mut self, u: &Vector, v: &Vector, k: f64) -> Result<(), NumError> {
        if u.len() != self.rows || v.len() != self.cols {
            return Err(shape_err(
                "add_outer",
                format!(
                    "matrix is {}x{}, u len {}, v len {}",
                    self.rows,
                    self.cols,
                    u.len(),
                    v.len()
                ),
            ));
        }
        for i in 0..self.rows {
            let ui = u[i];
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, vj) in row.iter_mut().zip(v.as_slice()) {
                *r += k * ui * vj;
            }
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    /// Validates the internal length invariant after deserialization.
    pub fn validate_shape(&self) -> Result<(), NumError> {
        if self.data.len() != self.rows * self.cols {
            return Err(shape_err(
                "Matrix::validate_shape",
                format!(
                    "{}x{} needs {} entries, got {}",
                    self.rows,
                    self.cols,
                    self.rows * self.cols,
                    self.data.len()
                ),
            ));
        }
        Ok(())
    }
}

/// Numerically stable softmax: subtracts the max before exponentiating, then
/// normalizes. Errors on empty input or non-finite components.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, NumError> {
    if logits.is_empty() {
        return Err(shape_err("softmax", "empty input".to_string()));
    }
    if logits.iter().any(|a| !a.is_finite()) {
        return Err(NumError::NonFinite { op: "softmax" });
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|a| (a - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Elementwise `tanh`.
pub fn tanh(v: &Vector) -> Vector {
    Vector::new(v.iter().map(|a| a.tanh()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_matches_hand_computation() {
        let m = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let v = Vector::new(vec![1.0, 0.5, -1.0]);
        let out = m.matvec(&v).unwrap();
        assert_eq!(out.as_slice(), &[-1.0, 0.5]); // [1+1-3, 4+2.5-6]
    }

    #[test]
    fn matvec_rejects_wrong_length() {
        let m = Matrix::zeros(2, 3);
        let v = Vector::zeros(2);
        assert!(matches!(m.matvec(&v), Err(NumError::Shape { .. })));
    }

    #[test]
    fn matvec_transpose_agrees_with_explicit_transpose() {
        let m = Matrix::new(2, 3, vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]).unwrap();
        let v = Vector::new(vec![2.0, -1.0]);
        let fast = m.matvec_transpose(&v).unwrap();
        let slow = m.transpose().matvec(&v).unwrap();
        assert_eq!(fast, slow);
    }

    #[test]
    fn matmul_matches_hand_computation() {
        let a = Matrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Matrix::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn add_outer_is_rank_one_update() {
        let mut m = Matrix::zeros(2, 3);
        let u = Vector::new(vec![1.0, 2.0]);
        let v = Vector::new(vec![3.0, 4.0, 5.0]);
        m.add_outer(&u, &v, 0.5).unwrap();
        assert_eq!(m.data(), &[1.5, 2.0, 2.5, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn softmax_normalizes_and_orders() {
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(p[0] < p[1] && p[1] < p[2]);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[0.1, -2.0, 5.0, 3.3, 0.0]).unwrap();
        let b = softmax(&[100.1, 98.0, 105.0, 103.3, 100.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = softmax(&[1000.0, 1001.0, 999.0]).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_empty_and_non_finite() {
        assert!(matches!(softmax(&[]), Err(NumError::Shape { .. })));
        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(NumError::NonFinite { .. })));
    }
}
