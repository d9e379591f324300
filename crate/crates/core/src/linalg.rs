//! Dense symmetric kernels: Gram matrices, symmetric eigendecomposition,
//! SPD solves and the symmetric inverse square root.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::InteractionMatrix;

/// Relative eigenvalue threshold below which a spectrum counts as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Caps on dense allocations. Any dense square matrix of dimension above
/// `max_dense_dim` is refused with [`Error::Capacity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_dense_dim: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_dense_dim: 16_384,
        }
    }
}

impl Limits {
    pub fn check(&self, dim: usize) -> Result<()> {
        if dim > self.max_dense_dim {
            Err(Error::Capacity {
                requested: dim,
                cap: self.max_dense_dim,
            })
        } else {
            Ok(())
        }
    }
}

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, values }
    }

    /// Build from nested rows; panics on ragged input (test and fixture helper).
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        DenseMatrix {
            rows: rows.len(),
            cols,
            values: rows.concat(),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m.values[i * n + i] = v;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.values[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        t
    }

    /// `self * rhs`, parallel over output rows.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        if rhs.cols == 0 {
            return Ok(out);
        }
        out.values
            .par_chunks_mut(rhs.cols)
            .enumerate()
            .for_each(|(i, out_row)| {
                for (k, &a) in self.row(i).iter().enumerate() {
                    if a != 0.0 {
                        for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                            *o += a * b;
                        }
                    }
                }
            });
        Ok(out)
    }

    /// `self^T * self` (column Gram).
    pub fn gram_cols(&self) -> SymmetricMatrix {
        self.transpose().gram_rows()
    }

    /// `self * self^T` (row Gram), computed on the upper triangle and mirrored.
    pub fn gram_rows(&self) -> SymmetricMatrix {
        let n = self.rows;
        SymmetricMatrix::from_upper_par(n, |i, j| dot(self.row(i), self.row(j)))
    }

    pub fn scale(&self, c: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in sub");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.shape(), rhs.shape(), "shape mismatch in add");
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `||self - other||_F / ||self||_F`, or the absolute difference when
    /// `self` is zero.
    pub fn rel_diff(&self, other: &DenseMatrix) -> f64 {
        let diff = self.sub(other).frobenius_norm();
        let base = self.frobenius_norm();
        if base == 0.0 {
            diff
        } else {
            diff / base
        }
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Square symmetric matrix in full storage; only constructible through paths
/// that write `a_ij` and `a_ji` from the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    inner: DenseMatrix,
}

impl SymmetricMatrix {
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        SymmetricMatrix { inner: m }
    }

    fn from_upper_par(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        if n > 0 {
            m.values
                .par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, row)| {
                    for (j, v) in row.iter_mut().enumerate().skip(i) {
                        *v = f(i, j);
                    }
                });
        }
        mirror_upper(&mut m);
        SymmetricMatrix { inner: m }
    }

    /// Take a nearly symmetric matrix and average it with its transpose.
    pub fn symmetrize(m: &DenseMatrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch {
                expected: m.rows,
                found: m.cols,
            });
        }
        Ok(Self::from_upper(m.rows, |i, j| 0.5 * (m.get(i, j) + m.get(j, i))))
    }

    /// Accept a matrix that is already exactly symmetric.
    pub fn try_from_dense(m: DenseMatrix) -> Result<Self> {
        if !m.is_symmetric(0.0) {
            return Err(Error::InvalidArgument("matrix is not symmetric".into()));
        }
        Ok(SymmetricMatrix { inner: m })
    }

    pub fn identity(n: usize) -> Self {
        SymmetricMatrix {
            inner: DenseMatrix::identity(n),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        SymmetricMatrix {
            inner: DenseMatrix::diagonal(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.rows
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.inner
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.inner
    }

    pub fn diag(&self) -> Vec<f64> {
        self.inner.diag()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> SymmetricMatrix {
        let mut m = self.inner.clone();
        for i in 0..m.rows {
            let v = m.get(i, i) + shift;
            m.set(i, i, v);
        }
        SymmetricMatrix { inner: m }
    }
}

fn mirror_upper(m: &mut DenseMatrix) {
    let n = m.rows;
    for i in 0..n {
        for j in 0..i {
            let v = m.values[j * n + i];
            m.values[i * n + j] = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramSide {
    /// `X^T X`, |I| x |I|.
    Items,
    /// `X X^T`, |U| x |U|.
    Users,
}

/// Gram matrix of a binary interaction matrix, accumulated from the sparse
/// rows. Entries are co-occurrence counts, so the result is exact.
pub fn gram(x: &InteractionMatrix, side: GramSide) -> Result<SymmetricMatrix> {
    gram_with_limits(x, side, &Limits::default())
}

pub fn gram_with_limits(x: &InteractionMatrix, side: GramSide, limits: &Limits) -> Result<SymmetricMatrix> {
    if x.nnz() == 0 {
        return Err(Error::EmptyDataset("interaction matrix has no entries".into()));
    }
    let (dim, lists) = match side {
        GramSide::Items => (x.n_items(), x.rows().map(<[usize]>::to_vec).collect::<Vec<_>>()),
        GramSide::Users => (x.n_users(), x.columns()),
    };
    limits.check(dim)?;
    let mut m = DenseMatrix::zeros(dim, dim);
    for list in &lists {
        for (k, &a) in list.iter().enumerate() {
            let row = &mut m.values[a * dim..(a + 1) * dim];
            for &b in &list[k..] {
                row[b] += 1.0;
            }
        }
    }
    mirror_upper(&mut m);
    Ok(SymmetricMatrix { inner: m })
}

/// Eigenvectors (columns of `vectors`) with eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub vectors: DenseMatrix,
    pub values: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `U f(Σ) U^T` for a function of the eigenvalues.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let g: Vec<f64> = self.values.iter().map(|&s| f(s)).collect();
        let u = &self.vectors;
        let scaled = DenseMatrix::from_fn(u.n_rows(), u.n_cols(), |i, k| u.get(i, k) * g[k]);
        let mut m = scaled
            .matmul(&u.transpose())
            .expect("eigenvector matrix is square");
        mirror_upper(&mut m);
        SymmetricMatrix { inner: m }
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.reconstruct_with(|s| s)
    }

    /// Count of eigenvalues above `RANK_TOLERANCE * max(σ)`.
    pub fn numerical_rank(&self) -> usize {
        let top = self.values.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&s| s > RANK_TOLERANCE * top).count()
    }
}

const EIG_SIGN_TOLERANCE: f64 = 1e-10;

/// Symmetric eigendecomposition, eigenvalues descending. Each eigenvector is
/// signed so its first component with magnitude above 1e-10 is positive.
pub fn eigh(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    if n == 0 {
        return Ok(EigenDecomposition {
            vectors: DenseMatrix::zeros(0, 0),
            values: Vec::new(),
        });
    }
    if a.inner.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigh input has non-finite entries".into()));
    }
    let max_iter = 100 * n.max(10);
    let eig = SymmetricEigen::try_new(a.inner.to_nalgebra(), f64::EPSILON, max_iter).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigensolver did not converge within {max_iter} iterations (dim {n})"
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
    let mut vectors = DenseMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        values.push(eig.eigenvalues[k]);
        let v = eig.eigenvectors.column(k);
        let sign = v
            .iter()
            .find(|c| c.abs() > EIG_SIGN_TOLERANCE)
            .map_or(1.0, |c| c.signum());
        for i in 0..n {
            vectors.set(i, col, sign * v[i]);
        }
    }
    Ok(EigenDecomposition { vectors, values })
}

/// Lower Cholesky factor of an SPD matrix, row-major.
fn cholesky(a: &SymmetricMatrix) -> Result<DenseMatrix> {
    let n = a.dim();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.values[j * n..j * n + j];
        let d = a.get(j, j) - dot(lj, lj);
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l.values[j * n + j] = ljj;
        // column j below the diagonal; rows i > j are independent
        let (head, tail) = l.values.split_at_mut((j + 1) * n);
        let lj = &head[j * n..j * n + j];
        tail.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
            let i = j + 1 + k;
            let s = a.get(i, j) - dot(&row[..j], lj);
            row[j] = s / ljj;
        });
    }
    Ok(l)
}

/// Solve `A Z = B` for symmetric positive definite `A` via Cholesky.
pub fn spd_solve(a: &SymmetricMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.dim();
    if b.n_rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.n_rows(),
        });
    }
    let l = cholesky(a)?;
    // Work on B^T so each right-hand side is a contiguous row.
    let mut zt = b.transpose();
    if n > 0 {
        zt.values.par_chunks_mut(n).for_each(|z| {
            for i in 0..n {
                let row = l.row(i);
                z[i] = (z[i] - dot(&row[..i], &z[..i])) / row[i];
            }
            for i in (0..n).rev() {
                let mut s = z[i];
                for (k, zk) in z.iter().enumerate().skip(i + 1) {
                    s -= l.values[k * n + i] * zk;
                }
                z[i] = s / l.values[i * n + i];
            }
        });
    }
    Ok(zt.transpose())
}

/// `A^{-1}` for SPD `A`, symmetrized.
pub fn spd_inverse(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let inv = spd_solve(a, &DenseMatrix::identity(a.dim()))?;
    SymmetricMatrix::symmetrize(&inv)
}

/// `U (max(Σ,0) + eps I)^{-1/2} U^T`.
pub fn inv_sqrt(a: &SymmetricMatrix, eps: f64) -> Result<SymmetricMatrix> {
    let eig = eigh(a)?;
    inv_sqrt_from_eig(&eig, eps)
}

pub(crate) fn inv_sqrt_from_eig(eig: &EigenDecomposition, eps: f64) -> Result<SymmetricMatrix> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be finite and >= 0, got {eps}")));
    }
    let top = eig.values.first().copied().unwrap_or(0.0);
    let floor = -1e-8 * top.abs().max(1.0);
    if let Some(&low) = eig.values.iter().find(|&&s| s < floor) {
        return Err(Error::InvalidArgument(format!(
            "matrix has a negative eigenvalue {low:e}; expected positive semidefinite"
        )));
    }
    if eps == 0.0 {
        let rank = eig.numerical_rank();
        if rank < eig.dim() {
            return Err(Error::Singular {
                rank,
                dim: eig.dim(),
            });
        }
    }
    Ok(eig.reconstruct_with(|s| 1.0 / (s.max(0.0) + eps).sqrt()))
}
