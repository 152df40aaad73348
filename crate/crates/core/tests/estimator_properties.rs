use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use graphprec::estimator::{
    estimate_precision, infer_linear, representation_residual, sample_covariance, variance_h,
};
use graphprec::linalg::{cholesky, invert_spd, DenseMatrix};
use graphprec::simulation::{make_ground_truth, run_study, sample_mvn, Method, StudyConfig};
use graphprec::structure::GraphStructure;

fn banded_precision(p: usize, s0: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut om = DenseMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p.min(i + s0) {
            let v = rng.random_range(-1.0..1.0);
            om[(i, j)] = v;
            om[(j, i)] = v;
        }
    }
    for i in 0..p {
        let off: f64 = (0..p).filter(|&j| j != i).map(|j| om[(i, j)].abs()).sum();
        om[(i, i)] = off + rng.random_range(0.5..1.5);
    }
    om
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn true_covariance_recovers_precision(p in 2usize..30, s0 in 1usize..8, seed in any::<u64>()) {
        let s0 = s0.min(p);
        let omega = banded_precision(p, s0, seed);
        let sigma = invert_spd(&omega).unwrap();
        let est = estimate_precision(&sigma, &GraphStructure::banded(p, s0), false).unwrap();
        prop_assert!(est.omega_hat.sub(&omega).unwrap().max_abs() <= 1e-9);
    }

    #[test]
    fn representation_identity_holds_per_column(d in 2usize..12, seed in any::<u64>()) {
        let omega = banded_precision(d, d, seed);
        let sigma = invert_spd(&omega).unwrap();
        let x = sample_mvn(&sigma, 4 * d, seed ^ 1).unwrap();
        let s = sample_covariance(&x).unwrap();
        let w = s.sub(&sigma).unwrap();
        let s_inv = invert_spd(&s).unwrap();
        let scale = s_inv.max_abs().max(omega.max_abs()).powi(2) * w.max_abs().max(1.0);
        for pivot in 0..d {
            let r = representation_residual(&s_inv, &omega, &w, Some(pivot)).unwrap();
            prop_assert!(r <= 1e-10 * scale, "pivot {} residual {}", pivot, r);
        }
    }
}

#[test]
fn variance_formula_matches_simulation() {
    let omega_i = DenseMatrix::from_rows(&[[2.0, 0.5, 0.0], [0.5, 1.5, -0.3], [0.0, -0.3, 1.0]]).unwrap();
    let m = [0.4, -1.0, 0.7];
    let pivot = 1;
    let h = variance_h(&omega_i, &m, pivot).unwrap();
    let a = omega_i.matvec(&m).unwrap();
    let b = omega_i.column(pivot);
    let l = cholesky(&invert_spd(&omega_i).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 200_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let u: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..3).map(|i| (0..=i).map(|k| l.lower()[(i, k)] * u[k]).sum()).collect();
        let t: f64 = a.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() * b.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>();
        s1 += t;
        s2 += t * t;
    }
    let n = draws as f64;
    let var = (s2 - s1 * s1 / n) / (n - 1.0);
    assert!(((var - h) / h).abs() < 0.05, "{var} vs {h}");
}

#[test]
fn interval_contains_estimate_and_is_symmetric() {
    let gt = make_ground_truth(20, 4, 0.6).unwrap();
    let x = sample_mvn(&gt.sigma, 400, 5).unwrap();
    let s = sample_covariance(&x).unwrap();
    let m = [1.0, 0.5, 0.0, -0.25];
    let inf = infer_linear(&s, &gt.structure, 0, &m, 0.0, 0.9, 400).unwrap();
    assert!(inf.ci_low < inf.estimate && inf.estimate < inf.ci_high);
    assert!(((inf.ci_high - inf.estimate) - (inf.estimate - inf.ci_low)).abs() < 1e-12);
    assert!((inf.std_error - (inf.h_hat / 400.0).sqrt()).abs() < 1e-15);
    let wider = infer_linear(&s, &gt.structure, 0, &m, 0.0, 0.99, 400).unwrap();
    assert!(wider.ci_high - wider.ci_low > inf.ci_high - inf.ci_low);
}

#[test]
fn bias_does_not_depend_on_dimension() {
    let cfg = StudyConfig { n_list: vec![300], methods: vec![Method::Proposed], ..StudyConfig::default() };
    let rows = run_study(&cfg).unwrap().rows;
    assert_eq!(rows.len(), 5);
    let r = cfg.replications as f64;
    for a in &rows {
        for b in &rows {
            let se = (a.rel_bias_sd.powi(2) / r + b.rel_bias_sd.powi(2) / r).sqrt();
            assert!(
                (a.rel_bias_mean - b.rel_bias_mean).abs() < 3.0 * se,
                "p={} vs p={}: {} vs {}",
                a.p,
                b.p,
                a.rel_bias_mean,
                b.rel_bias_mean
            );
        }
    }
}
