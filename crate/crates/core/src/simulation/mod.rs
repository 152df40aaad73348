//! Ground truth, sampling, and Monte Carlo studies.

mod ground_truth;
mod normality;
mod report;
mod study;

pub use ground_truth::{banded_first_column, make_ground_truth, BandedModel, GroundTruth};
pub use normality::{error_trend, normality_study, ErrorTrendRow, NormalityResult};
pub use report::{comparison_table, format_number, study_csv, study_table};
pub use study::{run_study, Method, StudyConfig, StudyResult, StudyRow};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::linalg::{cholesky, CholeskyFactor, DenseMatrix, LinalgError};
use crate::tiger::TigerError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("true component {index} is zero; relative bias undefined")]
    ZeroTrueComponent { index: usize },
    #[error("length mismatch: estimate has {estimate} components, truth has {truth}")]
    LengthMismatch { estimate: usize, truth: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Tiger(#[from] TigerError),
}

/// Random number generator used for every stochastic path.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for one job, mixed from the master seed and a list of keys.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |h, &k| splitmix64(h ^ splitmix64(k)))
}

/// Multivariate normal sampler `x = L u`, `L = chol(Σ)`.
#[derive(Debug, Clone)]
pub struct MvnSampler {
    factor: CholeskyFactor,
}

impl MvnSampler {
    pub fn new(sigma: &DenseMatrix) -> Result<Self, SimulationError> {
        Ok(Self { factor: cholesky(sigma)? })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    /// `n` draws from `N(0, Σ)` as the rows of an `n × p` matrix.
    pub fn sample(&self, n: usize, seed: u64) -> DenseMatrix {
        let p = self.dim();
        let l = self.factor.lower();
        let mut rng = rng_from_seed(seed);
        let mut out = DenseMatrix::zeros(n, p);
        let mut u = vec![0.0; p];
        for r in 0..n {
            u.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let row = out.row_mut(r);
            for (i, x) in row.iter_mut().enumerate() {
                *x = crate::linalg::dot(&l.row(i)[..=i], &u[..=i]);
            }
        }
        out
    }
}

/// `n` i.i.d. draws from `N(0, Σ)`, seeded.
pub fn sample_mvn(sigma: &DenseMatrix, n: usize, seed: u64) -> Result<DenseMatrix, SimulationError> {
    Ok(MvnSampler::new(sigma)?.sample(n, seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasMetrics {
    pub rel_bias: f64,
    pub abs_bias: f64,
}

/// Mean relative and mean absolute componentwise error.
pub fn bias_metrics(w_hat: &[f64], w_true: &[f64]) -> Result<BiasMetrics, SimulationError> {
    if w_hat.len() != w_true.len() {
        return Err(SimulationError::LengthMismatch { estimate: w_hat.len(), truth: w_true.len() });
    }
    if let Some(index) = w_true.iter().position(|&t| t == 0.0) {
        return Err(SimulationError::ZeroTrueComponent { index });
    }
    let k = w_true.len() as f64;
    let (rel, abs) = w_hat.iter().zip(w_true).fold((0.0, 0.0), |(r, a), (&h, &t)| {
        let d = (h - t).abs();
        (r + d / t.abs(), a + d)
    });
    Ok(BiasMetrics { rel_bias: rel / k, abs_bias: abs / k })
}

/// Sample mean and sample standard deviation (divisor `len - 1`).
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::sample_covariance;

    #[test]
    fn bias_cases() {
        let b = bias_metrics(&[1.0, 0.6], &[1.0, 0.6]).unwrap();
        assert_eq!((b.rel_bias, b.abs_bias), (0.0, 0.0));
        let b = bias_metrics(&[1.1, 0.54], &[1.0, 0.6]).unwrap();
        assert!((b.rel_bias - 0.1).abs() < 1e-12);
        assert!((b.abs_bias - 0.08).abs() < 1e-12);
        assert!(matches!(bias_metrics(&[1.0, 1.0], &[1.0, 0.0]), Err(SimulationError::ZeroTrueComponent { index: 1 })));
        assert!(matches!(bias_metrics(&[1.0], &[1.0, 2.0]), Err(SimulationError::LengthMismatch { .. })));
    }

    #[test]
    fn mvn_identity_covariance() {
        let x = sample_mvn(&DenseMatrix::identity(2), 100_000, 3).unwrap();
        let s = sample_covariance(&x).unwrap();
        assert!(s.sub(&DenseMatrix::identity(2)).unwrap().max_abs() < 0.03, "{s:?}");
    }

    #[test]
    fn mvn_is_deterministic_and_handles_empty() {
        let sigma = DenseMatrix::from_rows(&[[2.0, 0.5], [0.5, 1.0]]).unwrap();
        assert_eq!(sample_mvn(&sigma, 50, 9).unwrap(), sample_mvn(&sigma, 50, 9).unwrap());
        assert_ne!(sample_mvn(&sigma, 50, 9).unwrap(), sample_mvn(&sigma, 50, 10).unwrap());
        assert_eq!(sample_mvn(&sigma, 0, 9).unwrap().shape(), (0, 2));
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(42, &[100, 1, 0]);
        assert_eq!(a, derive_seed(42, &[100, 1, 0]));
        assert_ne!(a, derive_seed(42, &[100, 1, 1]));
        assert_ne!(a, derive_seed(43, &[100, 1, 0]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    }

    #[test]
    fn mean_sd_uses_unbiased_divisor() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_sd(&[1.0]).1.is_nan());
    }
}
