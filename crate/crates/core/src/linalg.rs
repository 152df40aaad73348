//! Small dense linear algebra kernel.
//!
//! Everything here works on [`DenseMatrix`], a row-major `f64` matrix. The
//! matrices handled by the estimators are either `s_i × s_i` blocks with
//! `s_i` in the single digits or moderate `p × p` matrices, so plain loops
//! over contiguous rows are sufficient.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("data length {len} does not match shape {rows}x{cols}")]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: max asymmetry {asymmetry:e} exceeds {tol:e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },
    #[error("matrix is not positive definite: pivot {pivot} is {value:e} (tolerance {tol:e})")]
    NotPositiveDefinite { pivot: usize, value: f64, tol: f64 },
    #[error("matrix is empty")]
    EmptyMatrix,
}

/// Row-major real matrix. All entries are finite.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadShape { rows, cols, len: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { row: pos / cols.max(1), col: pos % cols.max(1) });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * m);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != m {
                return Err(LinalgError::DimensionMismatch {
                    expected: format!("{m} columns"),
                    found: format!("{} columns in row {i}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, m, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
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
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn column_vector(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    /// Diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("{} rows", self.cols),
                found: format!("{} rows", other.rows),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("vector of length {}", self.cols),
                found: format!("length {}", v.len()),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self, LinalgError> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                found: format!("{}x{}", other.rows, other.cols),
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    /// Largest absolute entry, `|A|_∞`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest `|a_ij - a_ji|`. Requires a square matrix.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(A + Aᵀ) / 2`. Requires a square matrix.
    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && self.max_asymmetry() <= tol
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DenseMatrix,
}

/// Tolerances for [`cholesky_with`]. `None` selects the scale-relative default.
#[derive(Debug, Clone, Copy, Default)]
pub struct CholeskyTolerance {
    /// Absolute bound on `max |a_ij - a_ji|`. Default `1e-10 · |A|_∞`.
    pub symmetry: Option<f64>,
    /// Pivots at or below this value are rejected. Default `1e-12 · max a_ii`.
    pub pivot: Option<f64>,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &DenseMatrix {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    /// `log det A = 2 Σ log l_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.lower[(i, i)].ln()).sum::<f64>()
    }

    /// Solves `A x = b` in place for a single right-hand side.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let l = &self.lower;
        let n = self.dim();
        for i in 0..n {
            let row = l.row(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * b[k];
            }
            b[i] = s / l[(i, i)];
        }
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: format!("vector of length {}", self.dim()),
                found: format!("length {}", b.len()),
            });
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }
}

/// Cholesky factorization with the default tolerances.
pub fn cholesky(a: &DenseMatrix) -> Result<CholeskyFactor, LinalgError> {
    cholesky_with(a, CholeskyTolerance::default())
}

/// Cholesky factorization. The input is symmetrized after the symmetry check
/// so that rounding-level asymmetry does not leak into the factor.
pub fn cholesky_with(a: &DenseMatrix, tol: CholeskyTolerance) -> Result<CholeskyFactor, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows, cols: a.cols });
    }
    if a.is_empty() {
        return Err(LinalgError::EmptyMatrix);
    }
    let sym_tol = tol.symmetry.unwrap_or(1e-10 * a.max_abs());
    let asym = a.max_asymmetry();
    if asym > sym_tol {
        return Err(LinalgError::NotSymmetric { asymmetry: asym, tol: sym_tol });
    }
    let n = a.rows;
    let max_diag = a.diagonal().into_iter().fold(0.0_f64, f64::max);
    let pivot_tol = tol.pivot.unwrap_or(1e-12 * max_diag);

    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let (upper, lower_rows) = l.data.split_at_mut(j * n);
        let row_j = &mut lower_rows[..n];
        for k in 0..j {
            let row_k = &upper[k * n..k * n + n];
            let a_jk = 0.5 * (a[(j, k)] + a[(k, j)]);
            row_j[k] = (a_jk - dot(&row_j[..k], &row_k[..k])) / row_k[k];
        }
        let d = a[(j, j)] - dot(&row_j[..j], &row_j[..j]);
        if !(d > pivot_tol) {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d, tol: pivot_tol });
        }
        row_j[j] = d.sqrt();
    }
    Ok(CholeskyFactor { lower: l })
}

/// Solves `A X = B` column by column given `chol(A)`.
pub fn solve_spd(factor: &CholeskyFactor, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    if factor.dim() != b.rows {
        return Err(LinalgError::DimensionMismatch {
            expected: format!("{} rows", factor.dim()),
            found: format!("{} rows", b.rows),
        });
    }
    let mut x = DenseMatrix::zeros(b.rows, b.cols);
    let mut col = vec![0.0; b.rows];
    for j in 0..b.cols {
        for i in 0..b.rows {
            col[i] = b[(i, j)];
        }
        factor.solve_in_place(&mut col);
        for i in 0..b.rows {
            x[(i, j)] = col[i];
        }
    }
    Ok(x)
}

/// Inverse of a symmetric positive-definite matrix, returned exactly symmetric.
pub fn invert_spd(a: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let factor = cholesky(a)?;
    let inv = solve_spd(&factor, &DenseMatrix::identity(a.rows))?;
    Ok(inv.symmetrized())
}

/// Cholesky factor of a symmetric banded matrix, `L` lower-banded with the
/// same bandwidth. Row `i` stores `l_{i, i-b} … l_{i, i}` (left-padded with
/// zeros for `i < b`).
#[derive(Debug, Clone, PartialEq)]
pub struct BandCholesky {
    dim: usize,
    bandwidth: usize,
    band: Vec<f64>,
}

impl BandCholesky {
    /// Factors the symmetric matrix with entries `entry(i, j)` for `|i - j| ≤ bandwidth`
    /// (zero outside the band).
    pub fn factor(dim: usize, bandwidth: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        let w = bandwidth + 1;
        let mut band = vec![0.0; dim * w];
        let max_diag = (0..dim).map(|i| entry(i, i)).fold(0.0_f64, f64::max);
        let pivot_tol = 1e-12 * max_diag;
        // l(i, j) lives at band[i * w + (j + bandwidth - i)]
        for i in 0..dim {
            let lo = i.saturating_sub(bandwidth);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bandwidth));
                let mut s = entry(i, j);
                for k in klo..j {
                    s -= band[i * w + (k + bandwidth - i)] * band[j * w + (k + bandwidth - j)];
                }
                if j == i {
                    if !(s > pivot_tol) {
                        return Err(LinalgError::NotPositiveDefinite { pivot: i, value: s, tol: pivot_tol });
                    }
                    band[i * w + bandwidth] = s.sqrt();
                } else {
                    band[i * w + (j + bandwidth - i)] = s / band[j * w + bandwidth];
                }
            }
        }
        Ok(Self { dim, bandwidth, band })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.band[i * (self.bandwidth + 1) + (j + self.bandwidth - i)]
    }

    /// Solves `Lᵀ x = b` in place. If `b ~ N(0, I)` then `x ~ N(0, A⁻¹)`.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        for i in (0..self.dim).rev() {
            let hi = (i + self.bandwidth).min(self.dim - 1);
            let mut s = b[i];
            for k in (i + 1)..=hi {
                s -= self.l(k, i) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
    }

    pub fn to_dense_lower(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, self.dim, |i, j| {
            if j <= i && i - j <= self.bandwidth {
                self.l(i, j)
            } else {
                0.0
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNorms {
    /// Maximum absolute column sum.
    pub l1: f64,
    /// Maximum absolute row sum.
    pub linf: f64,
    /// Maximum absolute entry.
    pub sup: f64,
    /// Largest singular value.
    pub spectral: f64,
}

pub fn norms(a: &DenseMatrix) -> Result<MatrixNorms, LinalgError> {
    if a.is_empty() {
        return Err(LinalgError::EmptyMatrix);
    }
    let l1 = (0..a.cols)
        .map(|j| (0..a.rows).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let linf = (0..a.rows).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    Ok(MatrixNorms { l1, linf, sup: a.max_abs(), spectral: spectral_norm(a) })
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// Largest singular value by power iteration on `AᵀA`, started from the
/// normalized all-ones vector.
pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    if a.is_empty() || a.max_abs() == 0.0 {
        return 0.0;
    }
    let n = a.cols;
    let ata_apply = |v: &[f64], out: &mut [f64]| {
        let av: Vec<f64> = (0..a.rows).map(|i| dot(a.row(i), v)).collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &s) in av.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(a.row(i)) {
                *o += x * s;
            }
        }
    };
    let start = vec![1.0 / (n as f64).sqrt(); n];
    let eig = power_iteration(n, &start, ata_apply).or_else(|| {
        // all-ones lies in the null space of AᵀA; restart on the heaviest column
        let j = (0..n)
            .max_by(|&x, &y| {
                let cx: f64 = (0..a.rows).map(|i| a[(i, x)].powi(2)).sum();
                let cy: f64 = (0..a.rows).map(|i| a[(i, y)].powi(2)).sum();
                cx.total_cmp(&cy)
            })
            .unwrap_or(0);
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        power_iteration(n, &e, ata_apply)
    });
    eig.unwrap_or(0.0).max(0.0).sqrt()
}

/// Power iteration for the dominant eigenvalue of a symmetric PSD operator.
/// Returns `None` if the iterate collapses to zero.
fn power_iteration(n: usize, start: &[f64], apply: impl Fn(&[f64], &mut [f64])) -> Option<f64> {
    let mut v = start.to_vec();
    let mut w = vec![0.0; n];
    let mut lambda = 0.0_f64;
    for _ in 0..POWER_MAX_ITER {
        apply(&v, &mut w);
        let rayleigh = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 || !nw.is_finite() {
            return None;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if (rayleigh - lambda).abs() <= POWER_TOL * rayleigh.abs() {
            return Some(rayleigh);
        }
        lambda = rayleigh;
    }
    Some(lambda)
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix.
pub fn max_eigenvalue_sym(a: &DenseMatrix) -> f64 {
    let n = a.rows;
    let start = vec![1.0 / (n as f64).sqrt(); n];
    let apply = |v: &[f64], out: &mut [f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(a.row(i), v);
        }
    };
    power_iteration(n, &start, apply).unwrap_or(0.0)
}

/// Smallest eigenvalue of a symmetric positive-definite matrix by inverse
/// power iteration on its Cholesky factor.
pub fn min_eigenvalue_spd(a: &DenseMatrix, tol: f64) -> Result<f64, LinalgError> {
    let factor = cholesky(a)?;
    Ok(min_eigenvalue_from_factor(&factor, tol))
}

pub fn min_eigenvalue_from_factor(factor: &CholeskyFactor, tol: f64) -> f64 {
    let n = factor.dim();
    // slightly non-uniform start so symmetric matrices whose lowest mode is
    // orthogonal to all-ones still converge
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) / (n as f64 + 1.0)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut mu = 0.0_f64;
    for _ in 0..POWER_MAX_ITER {
        let mut w = v.clone();
        factor.solve_in_place(&mut w);
        let rayleigh = dot(&v, &w);
        let nw = norm2(&w);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if (rayleigh - mu).abs() <= tol * rayleigh.abs() {
            mu = rayleigh;
            break;
        }
        mu = rayleigh;
    }
    1.0 / mu
}

/// Spectral condition number `λ_max / λ_min` of an SPD matrix.
pub fn condition_spd(a: &DenseMatrix, factor: &CholeskyFactor) -> f64 {
    max_eigenvalue_sym(a) / min_eigenvalue_from_factor(factor, 1e-10)
}
