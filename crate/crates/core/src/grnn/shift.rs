//! Graph shift operator (adjacency) and the polynomial graph filter built on it.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Sparse (CSR) form of an N×N shift matrix `B`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphShift<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> GraphShift<T> {
    pub fn from_dense(b: &Matrix<T>) -> Result<Self> {
        if b.rows() != b.cols() {
            return Err(Error::Shape(format!("shift matrix must be square, got {:?}", b.shape())));
        }
        let n = b.rows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for (j, &v) in b.row(i).iter().enumerate() {
                if v != T::zero() {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { n, row_ptr, cols, vals })
    }

    /// Uniform weight on the listed neighbours of every node.
    pub fn from_neighbors(neighbors: &[Vec<usize>], weight: T) -> Self {
        let n = neighbors.len();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for list in neighbors {
            cols.extend_from_slice(list);
            row_ptr.push(cols.len());
        }
        let vals = vec![weight; cols.len()];
        Self { n, row_ptr, cols, vals }
    }

    pub fn empty(n: usize) -> Self {
        Self { n, row_ptr: vec![0; n + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut b = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                b[(i, self.cols[k])] = self.vals[k];
            }
        }
        b
    }

    pub fn cast<U: Scalar>(&self) -> GraphShift<U> {
        GraphShift {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
        }
    }

    fn check(&self, x: &Matrix<T>) -> Result<()> {
        if x.rows() != self.n {
            return Err(Error::Shape(format!("shift is {}x{} but signal has {} rows", self.n, self.n, x.rows())));
        }
        Ok(())
    }

    /// `B · X`
    pub fn apply(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check(x)?;
        let mut out = Matrix::zeros(self.n, x.cols());
        for i in 0..self.n {
            let orow = out.row_mut(i);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let w = self.vals[k];
                for (o, &v) in orow.iter_mut().zip(x.row(self.cols[k])) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }

    /// `Bᵀ · X`
    pub fn apply_transpose(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check(x)?;
        let mut out = Matrix::zeros(self.n, x.cols());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let w = self.vals[k];
                let j = self.cols[k];
                for c in 0..x.cols() {
                    let v = x[(i, c)];
                    out[(j, c)] += w * v;
                }
            }
        }
        Ok(out)
    }

    /// `[X, B·X, …, B^{K-1}·X]` by repeated shifting.
    pub fn powers(&self, x: &Matrix<T>, taps: usize) -> Result<Vec<Matrix<T>>> {
        self.check(x)?;
        let mut out = Vec::with_capacity(taps);
        if taps == 0 {
            return Ok(out);
        }
        out.push(x.clone());
        for k in 1..taps {
            let next = self.apply(&out[k - 1])?;
            out.push(next);
        }
        Ok(out)
    }

    /// `Σ_k (B^{k-1}·X)·H_k`
    pub fn filter(&self, x: &Matrix<T>, coeffs: &[Matrix<T>]) -> Result<Matrix<T>> {
        let powers = self.powers(x, coeffs.len())?;
        filter_from_powers(&powers, coeffs)
    }
}

pub(crate) fn filter_from_powers<T: Scalar>(powers: &[Matrix<T>], coeffs: &[Matrix<T>]) -> Result<Matrix<T>> {
    let first = coeffs.first().ok_or_else(|| Error::Shape("filter needs at least one tap".into()))?;
    let (fin, fout) = first.shape();
    let rows = powers.first().map_or(0, Matrix::rows);
    let mut out = Matrix::zeros(rows, fout);
    for (p, h) in powers.iter().zip(coeffs) {
        if h.shape() != (fin, fout) || p.cols() != fin {
            return Err(Error::Shape(format!(
                "filter tap is {:?}, signal has {} features",
                h.shape(),
                p.cols()
            )));
        }
        p.matmul_acc(h, &mut out);
    }
    Ok(out)
}

/// `B · X` for a dense shift matrix.
pub fn graph_shift<T: Scalar>(b: &Matrix<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    if b.rows() != b.cols() {
        return Err(Error::Shape(format!("shift matrix must be square, got {:?}", b.shape())));
    }
    b.matmul(x)
}

/// Graph filter with a dense shift matrix; evaluated by iterated shifts.
pub fn graph_filter<T: Scalar>(b: &Matrix<T>, x: &Matrix<T>, coeffs: &[Matrix<T>]) -> Result<Matrix<T>> {
    GraphShift::from_dense(b)?.filter(x, coeffs)
}
