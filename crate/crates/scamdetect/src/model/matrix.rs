//! Row-major dense matrix, just enough linear algebra for the layer
//! formulas. No BLAS: graphs here are tiny and the whole point is that the
//! arithmetic is auditable against the dense oracles in the tests.

use std::ops::{Index, IndexMut};

use crate::num::Scalar;

use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "flat data matches dimensions");
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matmul(&self, rhs: &DenseMatrix<S>) -> Result<DenseMatrix<S>, ModelError> {
        if self.cols != rhs.rows {
            return Err(ModelError::DimensionMismatch {
                op: "matmul",
                lhs: (self.rows, self.cols),
                rhs: (rhs.rows, rhs.cols),
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == S::zero() {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &DenseMatrix<S>) -> Result<DenseMatrix<S>, ModelError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(ModelError::DimensionMismatch {
                op: "add",
                lhs: (self.rows, self.cols),
                rhs: (rhs.rows, rhs.cols),
            });
        }
        let mut out = self.clone();
        for (o, &b) in out.data.iter_mut().zip(&rhs.data) {
            *o += b;
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix<S> {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> DenseMatrix<S> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn relu(&self) -> DenseMatrix<S> {
        self.map(|v| if v > S::zero() { v } else { S::zero() })
    }

    /// Gradient gate for ReLU: zeroes `grad` wherever the activation output
    /// was not strictly positive.
    pub fn relu_gate(&self, grad: &DenseMatrix<S>) -> DenseMatrix<S> {
        debug_assert_eq!((self.rows, self.cols), (grad.rows, grad.cols));
        let mut out = grad.clone();
        for (g, &o) in out.data.iter_mut().zip(&self.data) {
            if o <= S::zero() {
                *g = S::zero();
            }
        }
        out
    }

    pub fn scale(&mut self, s: S) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, rhs: &DenseMatrix<S>) {
        debug_assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (o, &b) in self.data.iter_mut().zip(&rhs.data) {
            *o += b;
        }
    }

    pub fn max_abs(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<S: Scalar> Index<(usize, usize)> for DenseMatrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<S: Scalar> IndexMut<(usize, usize)> for DenseMatrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}
