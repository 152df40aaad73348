//! TIGER: column-wise precision estimation by SQRT-LASSO node regressions.
//!
//! Each column `j` of the normalized data is regressed on the others with
//!
//! ```text
//! β̂_j = argmin ‖Z_j - Z_{\j} β‖₂ / √n + λ ‖β‖₁
//! ```
//!
//! and mapped back to the precision scale through the residual scale
//! `τ̂_j = ‖Z_j - Z_{\j} β̂_j‖₂ / √n` and the sample variances `Γ̂`:
//! `Ω̂_jj = τ̂_j⁻² Γ̂_jj⁻¹`, `Ω̂_kj = -τ̂_j⁻² Γ̂_jj^{-1/2} Γ̂_kk^{-1/2} β̂_jk`.
//!
//! λ is chosen from a five-point grid on `[π√(log p/n)/4, π√(log p/n)]` by
//! K-fold cross-validation of the Gaussian likelihood loss.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::estimator::sample_covariance;
use crate::linalg::{cholesky, DenseMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TigerError {
    #[error("column {column} has zero sample variance")]
    ZeroVarianceColumn { column: usize },
    #[error("need at least {needed} observations, got {rows}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("coordinate descent did not converge in {iterations} sweeps")]
    DidNotConverge { iterations: usize, last: Box<SqrtLassoFit> },
    #[error("residual vanished (exact interpolation) for response column {column:?}")]
    DegenerateResidual { column: Option<usize> },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("every tuning value produced an infinite cross-validation loss")]
    AllFoldsDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TigerConfig {
    pub n_lambda: usize,
    pub k_folds: usize,
    /// Relative objective decrease per sweep below which descent stops.
    pub cd_tol: f64,
    pub cd_max_iter: usize,
    /// Seed for fold shuffling.
    pub seed: u64,
}

impl Default for TigerConfig {
    fn default() -> Self {
        Self { n_lambda: 5, k_folds: 5, cd_tol: 1e-7, cd_max_iter: 10_000, seed: 42 }
    }
}

impl TigerConfig {
    pub fn validate(&self) -> Result<(), TigerError> {
        if self.n_lambda < 2 {
            return Err(TigerError::InvalidConfig(format!("n_lambda must be >= 2, got {}", self.n_lambda)));
        }
        if self.k_folds < 2 {
            return Err(TigerError::InvalidConfig(format!("k_folds must be >= 2, got {}", self.k_folds)));
        }
        if !(self.cd_tol > 0.0) {
            return Err(TigerError::InvalidConfig(format!("cd_tol must be > 0, got {}", self.cd_tol)));
        }
        if self.cd_max_iter == 0 {
            return Err(TigerError::InvalidConfig("cd_max_iter must be > 0".into()));
        }
        Ok(())
    }
}

/// Column-standardized data and the original sample variances (diagonal of Γ̂).
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub z: DenseMatrix,
    pub gamma_diag: Vec<f64>,
}

/// Centers each column and scales it to unit sample variance (divisor `n - 1`).
pub fn normalize(x: &DenseMatrix) -> Result<Normalized, TigerError> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(TigerError::TooFewRows { rows: n, needed: 2 });
    }
    let mut z = x.clone();
    let mut gamma_diag = Vec::with_capacity(p);
    for j in 0..p {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !(var > 0.0) {
            return Err(TigerError::ZeroVarianceColumn { column: j });
        }
        let sd = var.sqrt();
        for (i, v) in col.iter().enumerate() {
            z[(i, j)] = (v - mean) / sd;
        }
        gamma_diag.push(var);
    }
    Ok(Normalized { z, gamma_diag })
}

/// `ZᵀZ / n`.
fn gram(z: &DenseMatrix) -> DenseMatrix {
    let (n, p) = z.shape();
    let mut g = DenseMatrix::zeros(p, p);
    for r in 0..n {
        let row = z.row(r);
        for a in 0..p {
            let za = row[a];
            if za == 0.0 {
                continue;
            }
            let dst = g.row_mut(a);
            for b in a..p {
                dst[b] += za * row[b];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for a in 0..p {
        for b in a..p {
            let v = g[(a, b)] * inv_n;
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqrtLassoFit {
    pub beta: Vec<f64>,
    /// `‖r‖₂ / √n` at `beta`.
    pub tau: f64,
    pub objective: f64,
    pub sweeps: usize,
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// SQRT-LASSO on sufficient statistics. `g` holds the second moments
/// `XᵀX / n` of all variables; `predictors` index the design columns within
/// `g` and `response` the response column.
///
/// Coordinate descent on the jointly convex scaled-lasso objective
/// `‖r‖² / (2nσ) + σ/2 + λ‖β‖₁`: every coordinate step is the lasso update
/// with penalty `λσ`, followed by the exact scale update `σ = ‖r‖/√n`.
fn solve_on_gram(
    g: &DenseMatrix,
    predictors: &[usize],
    response: usize,
    lambda: f64,
    cfg: &TigerConfig,
) -> Result<SqrtLassoFit, TigerError> {
    let q = predictors.len();
    let xty: Vec<f64> = predictors.iter().map(|&k| g[(k, response)]).collect();
    let yy = g[(response, response)];
    let diag: Vec<f64> = predictors.iter().map(|&k| g[(k, k)]).collect();
    let degenerate_rss = 1e-20 * yy;

    let mut beta = vec![0.0; q];
    let mut grad = xty.clone(); // Xᵀr / n
    let mut rss = yy; // ‖r‖² / n
    if !(rss > degenerate_rss) {
        return Err(TigerError::DegenerateResidual { column: None });
    }
    let mut objective = rss.sqrt();

    for sweep in 1..=cfg.cd_max_iter {
        for k in 0..q {
            let gkk = diag[k];
            if gkk <= 0.0 {
                continue;
            }
            if !(rss > degenerate_rss) {
                return Err(TigerError::DegenerateResidual { column: None });
            }
            let sigma = rss.sqrt();
            let old = beta[k];
            let new = soft_threshold(grad[k] + gkk * old, lambda * sigma) / gkk;
            let delta = new - old;
            if delta != 0.0 {
                rss += delta * (delta * gkk - 2.0 * grad[k]);
                beta[k] = new;
                let gk = predictors[k];
                for (l, gl) in grad.iter_mut().enumerate() {
                    *gl -= delta * g[(predictors[l], gk)];
                }
            }
        }
        // refresh gradient and residual from scratch to stop drift
        let active: Vec<usize> = (0..q).filter(|&k| beta[k] != 0.0).collect();
        for (l, gl) in grad.iter_mut().enumerate() {
            let pl = predictors[l];
            *gl = xty[l] - active.iter().map(|&k| g[(pl, predictors[k])] * beta[k]).sum::<f64>();
        }
        rss = yy - active.iter().map(|&k| beta[k] * (xty[k] + grad[k])).sum::<f64>();
        if !(rss > degenerate_rss) {
            return Err(TigerError::DegenerateResidual { column: None });
        }
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let next = rss.sqrt() + lambda * l1;
        let decrease = objective - next;
        objective = next;
        if decrease <= cfg.cd_tol * next.abs() {
            return Ok(SqrtLassoFit { beta, tau: rss.sqrt(), objective, sweeps: sweep });
        }
    }
    let last = SqrtLassoFit { beta, tau: rss.sqrt(), objective, sweeps: cfg.cd_max_iter };
    Err(TigerError::DidNotConverge { iterations: cfg.cd_max_iter, last: Box::new(last) })
}

/// SQRT-LASSO objective `‖y - Xβ‖₂/√n + λ‖β‖₁`.
pub fn sqrt_lasso_objective(design: &DenseMatrix, response: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let n = design.rows() as f64;
    let fitted = design.matvec(beta).expect("beta length matches design");
    let rss: f64 = response.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
    rss.sqrt() / n.sqrt() + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Solves the SQRT-LASSO for an explicit design and response.
pub fn sqrt_lasso(
    design: &DenseMatrix,
    response: &[f64],
    lambda: f64,
    cfg: &TigerConfig,
) -> Result<SqrtLassoFit, TigerError> {
    let (n, q) = design.shape();
    if response.len() != n {
        return Err(TigerError::DimensionMismatch {
            expected: format!("response of length {n}"),
            found: format!("{}", response.len()),
        });
    }
    if !(lambda > 0.0) {
        return Err(TigerError::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
    }
    let joined = DenseMatrix::from_fn(n, q + 1, |i, j| if j < q { design[(i, j)] } else { response[i] });
    let g = gram(&joined);
    let predictors: Vec<usize> = (0..q).collect();
    solve_on_gram(&g, &predictors, q, lambda, cfg)
}

/// Column `j` of Ω̂ from one node regression.
fn column_from_gram(
    g: &DenseMatrix,
    gamma_diag: &[f64],
    j: usize,
    lambda: f64,
    cfg: &TigerConfig,
) -> Result<(Vec<f64>, f64), TigerError> {
    let p = g.rows();
    let predictors: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    let fit = solve_on_gram(g, &predictors, j, lambda, cfg).map_err(|e| match e {
        TigerError::DegenerateResidual { .. } => TigerError::DegenerateResidual { column: Some(j) },
        other => other,
    })?;
    let tau2 = fit.tau * fit.tau;
    if !(tau2 > 0.0) {
        return Err(TigerError::DegenerateResidual { column: Some(j) });
    }
    let mut col = vec![0.0; p];
    col[j] = 1.0 / (tau2 * gamma_diag[j]);
    let sj = gamma_diag[j].sqrt();
    for (&k, &b) in predictors.iter().zip(&fit.beta) {
        if b != 0.0 {
            col[k] = -b / (tau2 * sj * gamma_diag[k].sqrt());
        }
    }
    Ok((col, fit.tau))
}

/// Column `j` of the TIGER estimate at a fixed λ.
pub fn tiger_column(
    data: &Normalized,
    j: usize,
    lambda: f64,
    cfg: &TigerConfig,
) -> Result<Vec<f64>, TigerError> {
    let p = data.z.cols();
    if j >= p {
        return Err(TigerError::IndexOutOfRange { index: j, dim: p });
    }
    column_from_gram(&gram(&data.z), &data.gamma_diag, j, lambda, cfg).map(|(c, _)| c)
}

/// Full TIGER estimate at a fixed λ; columns are fitted in parallel.
/// Returns Ω̂ (not symmetrized) and the per-column τ̂.
pub fn tiger_estimate(data: &Normalized, lambda: f64, cfg: &TigerConfig) -> Result<(DenseMatrix, Vec<f64>), TigerError> {
    let p = data.z.cols();
    if p < 2 {
        return Err(TigerError::InvalidSize(format!("need p >= 2, got {p}")));
    }
    let g = gram(&data.z);
    let cols: Vec<Result<(Vec<f64>, f64), TigerError>> =
        (0..p).into_par_iter().map(|j| column_from_gram(&g, &data.gamma_diag, j, lambda, cfg)).collect();
    let mut omega = DenseMatrix::zeros(p, p);
    let mut taus = Vec::with_capacity(p);
    for (j, c) in cols.into_iter().enumerate() {
        let (col, tau) = c?;
        for (k, v) in col.into_iter().enumerate() {
            omega[(k, j)] = v;
        }
        taus.push(tau);
    }
    Ok((omega, taus))
}

/// `n_lambda` equally spaced values on `[π√(log p/n)/4, π√(log p/n)]`, ascending.
pub fn lambda_grid(p: usize, n: usize, n_lambda: usize) -> Result<Vec<f64>, TigerError> {
    if p < 2 || n < 2 {
        return Err(TigerError::InvalidSize(format!("need p >= 2 and n >= 2, got p={p}, n={n}")));
    }
    if n_lambda < 2 {
        return Err(TigerError::InvalidSize(format!("need at least 2 grid points, got {n_lambda}")));
    }
    let hi = PI * ((p as f64).ln() / n as f64).sqrt();
    Ok(grid_between(hi / 4.0, hi, n_lambda))
}

fn grid_between(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|t| if t + 1 == count { hi } else { lo + step * t as f64 }).collect()
}

/// Gaussian likelihood loss `tr(S Ω̂) - log det Ω̂` with Ω̂ symmetrized;
/// `+∞` when the symmetrized estimate is not positive definite.
pub fn likelihood_loss(s_test: &DenseMatrix, omega_hat: &DenseMatrix) -> f64 {
    let sym = omega_hat.symmetrized();
    match cholesky(&sym) {
        Ok(f) => {
            let p = sym.rows();
            let mut tr = 0.0;
            for i in 0..p {
                tr += crate::linalg::dot(s_test.row(i), &sym.column(i));
            }
            tr - f.log_det()
        }
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TigerFit {
    pub omega_hat: DenseMatrix,
    pub chosen_lambda: f64,
    /// `(λ, mean held-out loss)` for every grid value, ascending in λ.
    pub cv_losses: Vec<(f64, f64)>,
    pub per_column_tau: Vec<f64>,
}

fn rows_of(x: &DenseMatrix, idx: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(idx.len(), x.cols(), |i, j| x[(idx[i], j)])
}

/// Seeded shuffle followed by a contiguous split into `k` folds whose sizes
/// differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(perm[start..start + len].to_vec());
        start += len;
    }
    folds
}

/// Selects λ by K-fold cross-validation and refits on the full data.
pub fn cross_validate(x: &DenseMatrix, cfg: &TigerConfig) -> Result<TigerFit, TigerError> {
    cfg.validate()?;
    let (n, p) = x.shape();
    if n < 2 * cfg.k_folds {
        return Err(TigerError::TooFewRows { rows: n, needed: 2 * cfg.k_folds });
    }
    let grid = lambda_grid(p, n, cfg.n_lambda)?;
    let folds = fold_assignment(n, cfg.k_folds, cfg.seed);

    // losses[fold][lambda]
    let losses: Vec<Vec<f64>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| -> Result<Vec<f64>, TigerError> {
            let train_idx: Vec<usize> =
                folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, idx)| idx.iter().copied()).collect();
            let train = normalize(&rows_of(x, &train_idx))?;
            let s_test = sample_covariance(&rows_of(x, test_idx)).expect("folds hold at least two rows");
            let g = gram(&train.z);
            grid.par_iter()
                .map(|&lambda| {
                    let cols: Result<Vec<(Vec<f64>, f64)>, TigerError> =
                        (0..p).map(|j| column_from_gram(&g, &train.gamma_diag, j, lambda, cfg)).collect();
                    match cols {
                        Ok(cols) => {
                            let omega = DenseMatrix::from_fn(p, p, |r, c| cols[c].0[r]);
                            Ok(likelihood_loss(&s_test, &omega))
                        }
                        Err(TigerError::DegenerateResidual { .. }) | Err(TigerError::DidNotConverge { .. }) => {
                            Ok(f64::INFINITY)
                        }
                        Err(e) => Err(e),
                    }
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let cv_losses: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(l, &lambda)| (lambda, losses.iter().map(|fl| fl[l]).sum::<f64>() / folds.len() as f64))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for &(lambda, loss) in &cv_losses {
        if loss.is_finite() && best.is_none_or(|(_, b)| loss < b) {
            best = Some((lambda, loss));
        }
    }
    let (chosen_lambda, _) = best.ok_or(TigerError::AllFoldsDegenerate)?;
    let full = normalize(x)?;
    let (omega_hat, per_column_tau) = tiger_estimate(&full, chosen_lambda, cfg)?;
    Ok(TigerFit { omega_hat, chosen_lambda, cv_losses, per_column_tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(n: usize, p: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    fn standardized_design(n: usize, q: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
        let raw = random_matrix(n, q + 1, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        // response correlated with the first two predictors
        let mut data = raw.clone();
        for i in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            data[(i, q)] = 0.8 * raw[(i, 0)] - 0.5 * raw[(i, 1)] + 0.6 * e;
        }
        let z = normalize(&data).unwrap().z;
        let design = DenseMatrix::from_fn(n, q, |i, j| z[(i, j)]);
        (design, z.column(q))
    }

    #[test]
    fn normalize_cases() {
        let x = DenseMatrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        assert!(matches!(normalize(&x), Err(TigerError::ZeroVarianceColumn { column: 1 })));
        let x = DenseMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let nz = normalize(&x).unwrap();
        assert_eq!(nz.z.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(nz.gamma_diag, vec![1.0]);
        let again = normalize(&nz.z).unwrap();
        assert!(again.z.sub(&nz.z).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn normalize_is_scale_equivariant() {
        let x = random_matrix(30, 3, 1);
        let scaled = DenseMatrix::from_fn(30, 3, |i, j| if j == 1 { 7.5 * x[(i, j)] } else { x[(i, j)] });
        let a = normalize(&x).unwrap();
        let b = normalize(&scaled).unwrap();
        assert!(a.z.sub(&b.z).unwrap().max_abs() < 1e-12);
        assert!((b.gamma_diag[1] - 56.25 * a.gamma_diag[1]).abs() < 1e-12 * b.gamma_diag[1]);
    }

    #[test]
    fn large_lambda_gives_zero() {
        let (design, y) = standardized_design(40, 5, 3);
        let n = 40.0_f64;
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let null = (0..5)
            .map(|k| crate::linalg::dot(&design.column(k), &y).abs() / (n.sqrt() * ynorm))
            .fold(0.0, f64::max);
        let fit = sqrt_lasso(&design, &y, null * 1.0001, &TigerConfig::default()).unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        // just below the threshold something enters
        let fit = sqrt_lasso(&design, &y, null * 0.9, &TigerConfig::default()).unwrap();
        assert!(fit.beta.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn tiny_lambda_single_predictor_matches_ols() {
        let (design, y) = standardized_design(50, 1, 5);
        let x = design.column(0);
        let ols = crate::linalg::dot(&x, &y) / crate::linalg::dot(&x, &x);
        let cfg = TigerConfig { cd_tol: 1e-12, ..TigerConfig::default() };
        let fit = sqrt_lasso(&design, &y, 1e-6, &cfg).unwrap();
        assert!((fit.beta[0] - ols).abs() < 1e-3, "{} vs {ols}", fit.beta[0]);
    }

    #[test]
    fn solution_is_a_local_minimum() {
        let (design, y) = standardized_design(20, 5, 11);
        let lambda = 0.15;
        let cfg = TigerConfig { cd_tol: 1e-12, ..TigerConfig::default() };
        let fit = sqrt_lasso(&design, &y, lambda, &cfg).unwrap();
        let best = sqrt_lasso_objective(&design, &y, &fit.beta, lambda);
        assert!((best - fit.objective).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let delta: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = crate::linalg::norm2(&delta);
            let radius: f64 = rand::Rng::random_range(&mut rng, 0.0..0.1);
            let trial: Vec<f64> = fit.beta.iter().zip(&delta).map(|(b, d)| b + d * radius / norm).collect();
            assert!(sqrt_lasso_objective(&design, &y, &trial, lambda) >= best - 1e-12);
        }
    }

    #[test]
    fn kkt_conditions_hold() {
        for seed in 0..10 {
            let (design, y) = standardized_design(60, 8, 100 + seed);
            let lambda = 0.08 + 0.02 * seed as f64;
            let fit = sqrt_lasso(&design, &y, lambda, &TigerConfig::default()).unwrap();
            let fitted = design.matvec(&fit.beta).unwrap();
            let r: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
            let scale = (60f64).sqrt() * crate::linalg::norm2(&r);
            for k in 0..8 {
                let corr = crate::linalg::dot(&design.column(k), &r) / scale;
                if fit.beta[k] != 0.0 {
                    assert!((corr - lambda * fit.beta[k].signum()).abs() < 1e-4, "seed {seed} k {k}: {corr}");
                } else {
                    assert!(corr.abs() <= lambda + 1e-4);
                }
            }
        }
    }

    #[test]
    fn zero_beta_column_is_scaled_unit_vector() {
        let x = random_matrix(30, 3, 21);
        let nz = normalize(&x).unwrap();
        let col = tiger_column(&nz, 1, 10.0, &TigerConfig::default()).unwrap();
        let tau2 = 29.0 / 30.0;
        assert!((col[1] - 1.0 / (tau2 * nz.gamma_diag[1])).abs() < 1e-12);
        assert_eq!((col[0], col[2]), (0.0, 0.0));
        assert!(matches!(
            tiger_column(&nz, 3, 0.1, &TigerConfig::default()),
            Err(TigerError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn independent_data_recovers_identity() {
        let x = random_matrix(500, 5, 8);
        let nz = normalize(&x).unwrap();
        let lambda = lambda_grid(5, 500, 5).unwrap()[2];
        for j in 0..5 {
            let col = tiger_column(&nz, j, lambda, &TigerConfig::default()).unwrap();
            assert!((col[j] - 1.0).abs() < 0.15, "{col:?}");
            for (k, v) in col.iter().enumerate() {
                if k != j {
                    assert!(v.abs() < 0.15);
                }
            }
        }
    }

    #[test]
    fn grid_cases() {
        // √(log p / n) = 1/π  ⇔  n = π² log p
        let p = 10usize;
        let n_real = PI * PI * (p as f64).ln();
        let hi = PI * ((p as f64).ln() / n_real).sqrt();
        assert!((hi - 1.0).abs() < 1e-12);
        let g = grid_between(hi / 4.0, hi, 5);
        for (a, b) in g.iter().zip([0.25, 0.4375, 0.625, 0.8125, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let two = lambda_grid(10, 100, 2).unwrap();
        let top = PI * (10f64.ln() / 100.0).sqrt();
        assert_eq!(two.len(), 2);
        assert!((two[0] - top / 4.0).abs() < 1e-15 && two[1] == top);
        assert!(matches!(lambda_grid(10, 100, 1), Err(TigerError::InvalidSize(_))));
        assert!(lambda_grid(1, 100, 5).is_err());
    }

    #[test]
    fn folds_partition_rows() {
        let folds = fold_assignment(23, 5, 7);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(folds, fold_assignment(23, 5, 7));
    }

    #[test]
    fn cross_validation_structure_and_determinism() {
        let x = random_matrix(60, 6, 77);
        let cfg = TigerConfig::default();
        let fit = cross_validate(&x, &cfg).unwrap();
        assert_eq!(fit.cv_losses.len(), 5);
        let min = fit.cv_losses.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let chosen = fit.cv_losses.iter().find(|c| c.0 == fit.chosen_lambda).unwrap();
        assert_eq!(chosen.1, min);
        assert!(fit.per_column_tau.iter().all(|&t| t > 0.0));
        let again = cross_validate(&x, &cfg).unwrap();
        assert_eq!(fit, again);
        assert!(matches!(
            cross_validate(&random_matrix(9, 3, 1), &cfg),
            Err(TigerError::TooFewRows { .. })
        ));
    }

    #[test]
    fn non_pd_loss_is_infinite() {
        let s = DenseMatrix::identity(2);
        let bad = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert_eq!(likelihood_loss(&s, &bad), f64::INFINITY);
        assert!((likelihood_loss(&s, &DenseMatrix::identity(2)) - 2.0).abs() < 1e-15);
    }
}
