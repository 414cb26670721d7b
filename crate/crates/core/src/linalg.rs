//! Dense complex linear algebra for the small matrices used throughout the crate.
//!
//! Matrices are stored row-major. Eigen- and singular-value decompositions are
//! delegated to `nalgebra`; everything here wraps them with the input checks
//! and post-conditions the rest of the crate relies on.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical tolerances shared across modules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed relative hermiticity defect on eigensolver input.
    pub hermitian: f64,
    /// Allowed residual on reconstruction and orthonormality.
    pub residual: f64,
    /// Allowed unitarity defect of scattering matrices and steps.
    pub unitary: f64,
    /// Eigenvalue counting window around +-1.
    pub count: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { hermitian: 1e-12, residual: 1e-10, unitary: 1e-12, count: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::LengthMismatch { expected: c, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(ComplexMatrix { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        for c in columns {
            if c.len() != rows {
                return Err(Error::LengthMismatch { expected: rows, found: c.len() });
            }
        }
        Ok(Self::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm of `H - H*`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    /// `||V diag(lambda) V* - H||_F`.
    pub fn reconstruction_residual(&self, h: &ComplexMatrix) -> f64 {
        let lambda: Vec<C64> = self.eigenvalues.iter().map(|&l| C64::new(l, 0.0)).collect();
        let v = &self.eigenvectors;
        let rebuilt = &(v * &ComplexMatrix::diagonal(&lambda)) * &v.adjoint();
        (&rebuilt - h).frobenius_norm()
    }

    /// `||V* V - I||_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        let v = &self.eigenvectors;
        (&(&v.adjoint() * v) - &ComplexMatrix::identity(v.cols())).frobenius_norm()
    }
}

pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEigen> {
    hermitian_eig_with(h, &Tolerances::default())
}

pub fn hermitian_eig_with(h: &ComplexMatrix, tol: &Tolerances) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(Error::NotSquare { rows: h.rows(), cols: h.cols() });
    }
    let defect = h.hermitian_defect();
    if !(defect <= tol.hermitian * h.frobenius_norm()) {
        return Err(Error::NotHermitian { defect });
    }
    let n = h.rows();
    if n == 0 {
        return Ok(HermitianEigen { eigenvalues: vec![], eigenvectors: ComplexMatrix::zeros(0, 0) });
    }
    // symmetrize so rounding in the input cannot leak into the solver
    let sym = ComplexMatrix::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let eig = sym.to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen { eigenvalues, eigenvectors })
}

/// Thin singular value decomposition `A = U diag(sigma) V*`, singular values descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

pub fn svd(a: &ComplexMatrix) -> Svd {
    let m = a.to_nalgebra();
    let k = a.rows().min(a.cols());
    if k == 0 {
        return Svd {
            u: ComplexMatrix::zeros(a.rows(), 0),
            singular_values: vec![],
            v: ComplexMatrix::zeros(a.cols(), 0),
        };
    }
    let dec = m.svd(true, true);
    let u = dec.u.expect("requested U");
    let v_t = dec.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| dec.singular_values[y].total_cmp(&dec.singular_values[x]));
    Svd {
        u: ComplexMatrix::from_fn(a.rows(), k, |i, j| u[(i, order[j])]),
        singular_values: order.iter().map(|&j| dec.singular_values[j]).collect(),
        v: ComplexMatrix::from_fn(a.cols(), k, |i, j| v_t[(order[j], i)].conj()),
    }
}

pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.rows().min(a.cols()) == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = a.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Operator norm and trace norm (largest and summed singular values).
pub fn matrix_norms(a: &ComplexMatrix) -> Result<(f64, f64)> {
    if !a.is_finite() {
        return Err(Error::InvalidParams { defect: f64::NAN });
    }
    let s = singular_values(a);
    let op = s.first().copied().unwrap_or(0.0);
    Ok((op, s.iter().sum()))
}

/// Operator norm of `G - I` for the Gram matrix of `vectors`.
pub fn gram_defect(vectors: &[Vec<C64>]) -> Result<f64> {
    let first = vectors.first().ok_or(Error::EmptyInput)?;
    let n = first.len();
    for v in vectors {
        if v.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: v.len() });
        }
    }
    let k = vectors.len();
    let g = ComplexMatrix::from_fn(k, k, |i, j| {
        let d = inner(&vectors[i], &vectors[j]);
        if i == j {
            d - ONE
        } else {
            d
        }
    });
    let eig = hermitian_eig_with(&g, &Tolerances { hermitian: 1e-9, ..Tolerances::default() })?;
    Ok(eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max))
}

/// `<a, b>`, antilinear in the first argument.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal basis of the span of `vectors` by Gram-Schmidt, dropping
/// vectors whose remainder has norm at most `cutoff`.
pub fn orthonormal_span(vectors: &[Vec<C64>], cutoff: f64) -> Result<Vec<Vec<C64>>> {
    let Some(first) = vectors.first() else { return Ok(vec![]) };
    let n = first.len();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        if v.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: v.len() });
        }
        let mut w = v.clone();
        // two passes of modified Gram-Schmidt; keeps exact zeros of the inputs
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &w);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let m = norm(&w);
        if m > cutoff {
            basis.push(w.into_iter().map(|x| x / m).collect());
        }
    }
    Ok(basis)
}

/// Orthonormal basis of `ker A` (right singular vectors with singular value <= cutoff).
pub fn null_space(a: &ComplexMatrix, cutoff: f64) -> Vec<Vec<C64>> {
    let n = a.cols();
    if a.rows() < n {
        // pad with zero rows so the thin SVD yields a full set of right vectors
        let padded = ComplexMatrix::from_fn(n, n, |i, j| if i < a.rows() { a[(i, j)] } else { ZERO });
        return null_space(&padded, cutoff);
    }
    let dec = svd(a);
    dec.singular_values.iter().enumerate().filter(|(_, s)| **s <= cutoff).map(|(j, _)| dec.v.column(j)).collect()
}
