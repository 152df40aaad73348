use crate::linalg::{self, cholesky, norms, solve_spd, BandCholesky, DenseMatrix};
use crate::structure::GraphStructure;

use super::{rng_from_seed, SimulationError};
use rand_distr::{Distribution, StandardNormal};

fn band_entry(rho: f64, s0: usize) -> impl Fn(usize, usize) -> f64 {
    move |i, j| {
        let d = i.abs_diff(j);
        if d < s0 {
            rho.powi(d as i32)
        } else {
            0.0
        }
    }
}

fn check_params(p: usize, s0: usize, rho: f64) -> Result<(), SimulationError> {
    if s0 < 1 || s0 > p {
        return Err(SimulationError::InvalidConfig(format!("need 1 <= s0 <= p, got s0={s0}, p={p}")));
    }
    if !(rho.abs() < 1.0) {
        return Err(SimulationError::InvalidConfig(format!("need |rho| < 1, got {rho}")));
    }
    Ok(())
}

/// Nonzero block of the first column: `(1, ρ, …, ρ^{s0-1})`.
pub fn banded_first_column(s0: usize, rho: f64) -> Vec<f64> {
    (0..s0).map(|k| rho.powi(k as i32)).collect()
}

/// Dense banded ground truth `ω_ij = ρ^|i-j|` for `|i - j| < s0`, with
/// `Σ = Ω⁻¹` and the eigenvalue range of Ω recorded.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub p: usize,
    pub s0: usize,
    pub rho: f64,
    pub omega: DenseMatrix,
    pub sigma: DenseMatrix,
    pub structure: GraphStructure,
    pub min_eig: f64,
    pub max_eig: f64,
    /// `‖Σ‖₁`.
    pub sigma_l1: f64,
}

impl GroundTruth {
    /// True nonzero block `w_i1` of column `i`, in support order.
    pub fn column_block(&self, i: usize) -> Vec<f64> {
        self.structure.support(i).iter().map(|&r| self.omega[(r, i)]).collect()
    }
}

pub fn make_ground_truth(p: usize, s0: usize, rho: f64) -> Result<GroundTruth, SimulationError> {
    check_params(p, s0, rho)?;
    let omega = DenseMatrix::from_fn(p, p, band_entry(rho, s0));
    let factor = cholesky(&omega)?;
    let sigma = solve_spd(&factor, &DenseMatrix::identity(p))?.symmetrized();
    let min_eig = linalg::min_eigenvalue_from_factor(&factor, 1e-8);
    let max_eig = linalg::max_eigenvalue_sym(&omega);
    let sigma_l1 = norms(&sigma)?.l1;
    Ok(GroundTruth {
        p,
        s0,
        rho,
        omega,
        sigma,
        structure: GraphStructure::banded(p, s0),
        min_eig,
        max_eig,
        sigma_l1,
    })
}

/// The same banded design kept in factored band form, for dimensions where
/// a dense `Σ` is too large. Draws are `x = L⁻ᵀ u` with `Ω = L Lᵀ`, so
/// `Cov(x) = Ω⁻¹` without ever forming Σ.
#[derive(Debug, Clone)]
pub struct BandedModel {
    pub p: usize,
    pub s0: usize,
    pub rho: f64,
    pub structure: GraphStructure,
    factor: BandCholesky,
}

impl BandedModel {
    pub fn new(p: usize, s0: usize, rho: f64) -> Result<Self, SimulationError> {
        check_params(p, s0, rho)?;
        let factor = BandCholesky::factor(p, s0 - 1, band_entry(rho, s0))?;
        Ok(Self { p, s0, rho, structure: GraphStructure::banded(p, s0), factor })
    }

    /// `n × p` sample from `N(0, Ω⁻¹)`.
    pub fn sample(&self, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = rng_from_seed(seed);
        let mut out = DenseMatrix::zeros(n, self.p);
        for r in 0..n {
            let row = out.row_mut(r);
            row.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            self.factor.solve_transpose_in_place(row);
        }
        out
    }

    pub fn first_column(&self) -> Vec<f64> {
        banded_first_column(self.s0, self.rho)
    }
}
