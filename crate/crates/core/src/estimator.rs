//! Column-wise precision matrix estimator for a known zero pattern.
//!
//! For column `i` with support `B_i`, the nonzero block of `Ω[:, i]` solves
//! `(B_iᵀ Σ B_i) w_i1 = f_i`. Plugging in the sample covariance gives
//! `ŵ_i1 = S_ni⁻¹ f_i`, which is exact when `S = Σ`. For a Gaussian sample,
//! `√n mᵀ(ŵ_i1 - w_i1) / √h` is asymptotically standard normal with
//! `h = ω_ii · mᵀΩ_i m + (mᵀΩ_i f_i)²`, `Ω_i = Σ_i⁻¹`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, cholesky, invert_spd, CholeskyFactor, DenseMatrix, LinalgError};
use crate::normal::two_sided_critical;
use crate::structure::{extract_submatrix, scatter_column, GraphStructure, StructureError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("need at least 2 observations, got {rows}")]
    TooFewRows { rows: usize },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("sample covariance block for column {column} is not positive definite ({source})")]
    SubmatrixNotPD { column: usize, source: LinalgError },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("variance is not positive (linear functional m must be nonzero)")]
    NonPositive,
    #[error("confidence level {0} must lie strictly between 0 and 1")]
    InvalidLevel(f64),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn check_data(x: &DenseMatrix) -> Result<(), EstimatorError> {
    if x.rows() < 2 {
        return Err(EstimatorError::TooFewRows { rows: x.rows() });
    }
    Ok(())
}

/// Column means with a second correction pass.
fn column_means(x: &DenseMatrix, cols: &[usize]) -> Vec<f64> {
    let n = x.rows() as f64;
    let mut mean = vec![0.0; cols.len()];
    for r in 0..x.rows() {
        let row = x.row(r);
        for (m, &c) in mean.iter_mut().zip(cols) {
            *m += row[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut corr = vec![0.0; cols.len()];
    for r in 0..x.rows() {
        let row = x.row(r);
        for ((d, &c), m) in corr.iter_mut().zip(cols).zip(&mean) {
            *d += row[c] - m;
        }
    }
    mean.iter().zip(&corr).map(|(m, d)| m + d / n).collect()
}

/// Sample covariance (divisor `n - 1`) of the listed columns of `x`.
pub fn sample_covariance_subset(x: &DenseMatrix, cols: &[usize]) -> Result<DenseMatrix, EstimatorError> {
    check_data(x)?;
    if let Some(&bad) = cols.iter().find(|&&c| c >= x.cols()) {
        return Err(EstimatorError::IndexOutOfRange { index: bad, dim: x.cols() });
    }
    let k = cols.len();
    let mean = column_means(x, cols);
    let mut acc = vec![0.0; k * k];
    let mut centered = vec![0.0; k];
    for r in 0..x.rows() {
        let row = x.row(r);
        for ((c, &col), m) in centered.iter_mut().zip(cols).zip(&mean) {
            *c = row[col] - m;
        }
        for a in 0..k {
            let ca = centered[a];
            let dst = &mut acc[a * k..a * k + k];
            for b in a..k {
                dst[b] += ca * centered[b];
            }
        }
    }
    let denom = (x.rows() - 1) as f64;
    let mut s = DenseMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = acc[a * k + b] / denom;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    Ok(s)
}

/// Sample covariance `S = Σ_k (x_k - x̄)(x_k - x̄)ᵀ / (n - 1)` of an `n × p` data matrix.
pub fn sample_covariance(x: &DenseMatrix) -> Result<DenseMatrix, EstimatorError> {
    let all: Vec<usize> = (0..x.cols()).collect();
    sample_covariance_subset(x, &all)
}

/// Estimate of one column of Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnEstimate {
    pub column: usize,
    pub support: Vec<usize>,
    pub pivot: usize,
    /// Nonzero block `ŵ_i1`, aligned with `support`.
    pub w_i1: Vec<f64>,
    /// Full column `ŵ_i = B_i ŵ_i1`.
    pub w_i: Vec<f64>,
}

fn factor_block(block: &DenseMatrix, column: usize) -> Result<CholeskyFactor, EstimatorError> {
    cholesky(block).map_err(|source| EstimatorError::SubmatrixNotPD { column, source })
}

/// `S_ni⁻¹ f` for a covariance block and pivot position, via Cholesky solve.
pub fn solve_block(block: &DenseMatrix, pivot: usize, column: usize) -> Result<Vec<f64>, EstimatorError> {
    if pivot >= block.rows() {
        return Err(EstimatorError::IndexOutOfRange { index: pivot, dim: block.rows() });
    }
    let factor = factor_block(block, column)?;
    let mut f = vec![0.0; block.rows()];
    f[pivot] = 1.0;
    factor.solve_in_place(&mut f);
    Ok(f)
}

pub fn estimate_column(s: &DenseMatrix, g: &GraphStructure, i: usize) -> Result<ColumnEstimate, EstimatorError> {
    if i >= g.p() {
        return Err(EstimatorError::IndexOutOfRange { index: i, dim: g.p() });
    }
    if s.shape() != (g.p(), g.p()) {
        return Err(EstimatorError::DimensionMismatch {
            expected: format!("{0}x{0} covariance", g.p()),
            found: format!("{}x{}", s.rows(), s.cols()),
        });
    }
    let map = g.selection(i)?;
    let block = extract_submatrix(s, &map)?;
    let w_i1 = solve_block(&block, map.pivot(), i)?;
    let w_i = scatter_column(&w_i1, &map, g.p())?;
    Ok(ColumnEstimate { column: i, support: map.support().to_vec(), pivot: map.pivot(), w_i1, w_i })
}

/// Assembled estimate `Ω̂ = (ŵ_1, …, ŵ_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub omega_hat: DenseMatrix,
    pub structure: GraphStructure,
    pub symmetrized: bool,
    /// Spectral condition number of each `S_ni`.
    pub per_column_condition: Vec<f64>,
}

/// Estimates every column independently (in parallel) and optionally
/// replaces the result by `(Ω̂ + Ω̂ᵀ) / 2`.
pub fn estimate_precision(
    s: &DenseMatrix,
    g: &GraphStructure,
    symmetrize: bool,
) -> Result<PrecisionEstimate, EstimatorError> {
    let p = g.p();
    if s.shape() != (p, p) {
        return Err(EstimatorError::DimensionMismatch {
            expected: format!("{p}x{p} covariance"),
            found: format!("{}x{}", s.rows(), s.cols()),
        });
    }
    let columns: Vec<Result<(Vec<f64>, f64), EstimatorError>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let map = g.selection(i)?;
            let block = extract_submatrix(s, &map)?;
            let factor = factor_block(&block, i)?;
            let mut w = map.indicator();
            factor.solve_in_place(&mut w);
            let cond = linalg::condition_spd(&block, &factor);
            Ok((scatter_column(&w, &map, p)?, cond))
        })
        .collect();

    let mut omega_hat = DenseMatrix::zeros(p, p);
    let mut per_column_condition = Vec::with_capacity(p);
    for (i, col) in columns.into_iter().enumerate() {
        let (w, cond) = col?;
        for (r, v) in w.into_iter().enumerate() {
            omega_hat[(r, i)] = v;
        }
        per_column_condition.push(cond);
    }
    if symmetrize {
        omega_hat = omega_hat.symmetrized();
    }
    Ok(PrecisionEstimate { omega_hat, structure: g.clone(), symmetrized: symmetrize, per_column_condition })
}

/// `Var(mᵀΩ_i Y Yᵀ Ω_i g_pivot)` for `Y ~ N(0, Ω_i⁻¹)`:
/// `ω_pp · mᵀΩ_i m + (mᵀΩ_i g_pivot)²`.
pub fn variance_h(omega_i: &DenseMatrix, m: &[f64], pivot: usize) -> Result<f64, EstimatorError> {
    let k = omega_i.rows();
    if !omega_i.is_square() || m.len() != k {
        return Err(EstimatorError::DimensionMismatch {
            expected: format!("{k}x{k} matrix and vector of length {k}"),
            found: format!("{}x{} and {}", omega_i.rows(), omega_i.cols(), m.len()),
        });
    }
    if pivot >= k {
        return Err(EstimatorError::IndexOutOfRange { index: pivot, dim: k });
    }
    let om = omega_i.matvec(m)?;
    let quad = linalg::dot(m, &om);
    let cross = om[pivot];
    let h = omega_i[(pivot, pivot)] * quad + cross * cross;
    if !(h > 0.0) {
        return Err(EstimatorError::NonPositive);
    }
    Ok(h)
}

/// Wald inference for `mᵀ w_i1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InferenceResult {
    pub estimate: f64,
    pub h_hat: f64,
    pub std_error: f64,
    pub z: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
}

/// Inference from a precomputed covariance block `S_ni` (support order) and
/// the pivot position of column `i` within it.
pub fn infer_linear_block(
    block: &DenseMatrix,
    pivot: usize,
    m: &[f64],
    null_value: f64,
    level: f64,
    n: usize,
) -> Result<InferenceResult, EstimatorError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EstimatorError::InvalidLevel(level));
    }
    if m.len() != block.rows() {
        return Err(EstimatorError::DimensionMismatch {
            expected: format!("m of length {}", block.rows()),
            found: format!("{}", m.len()),
        });
    }
    if pivot >= block.rows() {
        return Err(EstimatorError::IndexOutOfRange { index: pivot, dim: block.rows() });
    }
    let omega_hat_i = invert_spd(block).map_err(|source| EstimatorError::SubmatrixNotPD { column: pivot, source })?;
    let w_i1 = omega_hat_i.column(pivot);
    let estimate = linalg::dot(m, &w_i1);
    let h_hat = variance_h(&omega_hat_i, m, pivot)?;
    let std_error = (h_hat / n as f64).sqrt();
    let z = (estimate - null_value) / std_error;
    let half = two_sided_critical(level) * std_error;
    Ok(InferenceResult { estimate, h_hat, std_error, z, ci_low: estimate - half, ci_high: estimate + half, level })
}

/// Asymptotic-normal inference for `mᵀ w_i1` with plug-in `Ω̂_i = S_ni⁻¹`.
#[allow(clippy::too_many_arguments)]
pub fn infer_linear(
    s: &DenseMatrix,
    g: &GraphStructure,
    i: usize,
    m: &[f64],
    null_value: f64,
    level: f64,
    n: usize,
) -> Result<InferenceResult, EstimatorError> {
    if i >= g.p() {
        return Err(EstimatorError::IndexOutOfRange { index: i, dim: g.p() });
    }
    let map = g.selection(i)?;
    let block = extract_submatrix(s, &map)?;
    infer_linear_block(&block, map.pivot(), m, null_value, level, n).map_err(|e| match e {
        EstimatorError::SubmatrixNotPD { source, .. } => EstimatorError::SubmatrixNotPD { column: i, source },
        other => other,
    })
}

/// Sup-norm residual of the exact identity
/// `(S⁻¹ - Ω) = -Ω W Ω - Ω W (S⁻¹ - Ω)` with `W = S - Σ`, applied to basis
/// vector `g_pivot`, or to every basis vector when `pivot` is `None`.
pub fn representation_residual(
    s_inv: &DenseMatrix,
    omega: &DenseMatrix,
    w_mat: &DenseMatrix,
    pivot: Option<usize>,
) -> Result<f64, EstimatorError> {
    let k = omega.rows();
    for m in [s_inv, omega, w_mat] {
        if m.shape() != (k, k) {
            return Err(EstimatorError::DimensionMismatch {
                expected: format!("{k}x{k}"),
                found: format!("{}x{}", m.rows(), m.cols()),
            });
        }
    }
    if let Some(pv) = pivot {
        if pv >= k {
            return Err(EstimatorError::IndexOutOfRange { index: pv, dim: k });
        }
    }
    let diff = s_inv.sub(omega)?;
    let ow = omega.matmul(w_mat)?;
    let rhs = ow.matmul(omega)?.add(&ow.matmul(&diff)?)?;
    let resid = diff.add(&rhs)?;
    Ok(match pivot {
        Some(pv) => resid.column(pv).iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        None => resid.max_abs(),
    })
}
