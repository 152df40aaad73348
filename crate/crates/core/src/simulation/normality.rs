use rayon::prelude::*;
use serde::Serialize;

use crate::estimator::{estimate_precision, infer_linear_block, sample_covariance, sample_covariance_subset, EstimatorError};
use crate::linalg::{self, DenseMatrix};

use super::{derive_seed, GroundTruth, MvnSampler, SimulationError};

const NORMALITY_TAG: u64 = 0x2a0e;
const TREND_TAG: u64 = 0x7e4d;

/// Summary of standardized statistics `z = √n mᵀ(ŵ_i1 - w_i1) / √ĥ`.
/// Summary fields are `None` when no replications were run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityResult {
    pub z_samples: Vec<f64>,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub coverage95: Option<f64>,
}

pub fn normality_study(
    gt: &GroundTruth,
    n: usize,
    m: &[f64],
    i: usize,
    replications: usize,
    seed: u64,
) -> Result<NormalityResult, SimulationError> {
    if i >= gt.p {
        return Err(EstimatorError::IndexOutOfRange { index: i, dim: gt.p }.into());
    }
    let map = gt.structure.selection(i).map_err(EstimatorError::from)?;
    if m.len() != map.len() {
        return Err(EstimatorError::DimensionMismatch {
            expected: format!("m of length {}", map.len()),
            found: format!("{}", m.len()),
        }
        .into());
    }
    let target = linalg::dot(m, &gt.column_block(i));
    let sampler = MvnSampler::new(&gt.sigma)?;
    let draws: Vec<(f64, bool)> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<(f64, bool), SimulationError> {
            let x = sampler.sample(n, derive_seed(seed, &[NORMALITY_TAG, n as u64, i as u64, r as u64]));
            let block = sample_covariance_subset(&x, map.support())?;
            let inf = infer_linear_block(&block, map.pivot(), m, target, 0.95, n).map_err(|e| match e {
                EstimatorError::SubmatrixNotPD { source, .. } => EstimatorError::SubmatrixNotPD { column: i, source },
                other => other,
            })?;
            Ok((inf.z, inf.ci_low <= target && target <= inf.ci_high))
        })
        .collect::<Result<_, _>>()?;
    let z_samples: Vec<f64> = draws.iter().map(|d| d.0).collect();
    if z_samples.is_empty() {
        return Ok(NormalityResult { z_samples, mean: None, variance: None, coverage95: None });
    }
    let k = z_samples.len() as f64;
    let mean = z_samples.iter().sum::<f64>() / k;
    let variance = if z_samples.len() > 1 {
        Some(z_samples.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (k - 1.0))
    } else {
        None
    };
    let covered = draws.iter().filter(|d| d.1).count() as f64;
    Ok(NormalityResult { z_samples, mean: Some(mean), variance, coverage95: Some(covered / k) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTrendRow {
    pub n: usize,
    /// Median of `‖ŵ_i - w_i‖₂` over all columns and replications.
    pub median_column_l2: f64,
    /// Median over replications of `max_ij |ω̂_ij - ω_ij|`.
    pub median_sup: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Estimation error of the full precision estimate as the sample size grows.
pub fn error_trend(
    gt: &GroundTruth,
    n_list: &[usize],
    replications: usize,
    seed: u64,
) -> Result<Vec<ErrorTrendRow>, SimulationError> {
    let sampler = MvnSampler::new(&gt.sigma)?;
    n_list
        .iter()
        .map(|&n| {
            let per_rep: Vec<(Vec<f64>, f64)> = (0..replications)
                .into_par_iter()
                .map(|r| -> Result<(Vec<f64>, f64), SimulationError> {
                    let x = sampler.sample(n, derive_seed(seed, &[TREND_TAG, n as u64, r as u64]));
                    let s = sample_covariance(&x)?;
                    let est = estimate_precision(&s, &gt.structure, false)?;
                    let diff: DenseMatrix = est.omega_hat.sub(&gt.omega)?;
                    let cols = (0..gt.p).map(|j| linalg::norm2(&diff.column(j))).collect();
                    Ok((cols, diff.max_abs()))
                })
                .collect::<Result<_, _>>()?;
            let l2: Vec<f64> = per_rep.iter().flat_map(|(c, _)| c.iter().copied()).collect();
            let sup: Vec<f64> = per_rep.iter().map(|(_, s)| *s).collect();
            Ok(ErrorTrendRow { n, median_column_l2: median(l2), median_sup: median(sup) })
        })
        .collect()
}
