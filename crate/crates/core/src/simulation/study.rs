use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::estimator::{sample_covariance_subset, solve_block};
use crate::tiger::{cross_validate, TigerConfig};

use super::{bias_metrics, derive_seed, mean_sd, BandedModel, BiasMetrics, SimulationError};

const DATA_TAG: u64 = 0xda7a;

/// Estimated first-column block and its bias, or `None` for a failed replication.
type Outcome = Option<(Vec<f64>, BiasMetrics)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Proposed,
    Tiger,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Tiger => "tiger",
        }
    }

    fn key(self) -> u64 {
        match self {
            Method::Proposed => 1,
            Method::Tiger => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "proposed" => Ok(Method::Proposed),
            "tiger" => Ok(Method::Tiger),
            other => Err(format!("unknown method '{other}' (expected proposed or tiger)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub n_list: Vec<usize>,
    pub ratio_list: Vec<f64>,
    pub s0: usize,
    pub rho: f64,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub tiger: TigerConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n_list: vec![100, 300, 500],
            ratio_list: vec![0.1, 0.5, 1.0, 5.0, 10.0],
            s0: 4,
            rho: 0.6,
            replications: 300,
            seed: 42,
            methods: vec![Method::Proposed],
            tiger: TigerConfig::default(),
        }
    }
}

/// `p = round(ratio · n)`.
pub fn implied_p(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).round() as usize
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |msg: String| Err(SimulationError::InvalidConfig(msg));
        if self.replications < 2 {
            return bad(format!("replications must be >= 2, got {}", self.replications));
        }
        if self.n_list.is_empty() || self.ratio_list.is_empty() || self.methods.is_empty() {
            return bad("n list, ratio list and methods must be non-empty".into());
        }
        if self.s0 == 0 {
            return bad("s0 must be >= 1".into());
        }
        if !(self.rho.abs() < 1.0) {
            return bad(format!("need |rho| < 1, got {}", self.rho));
        }
        for &ratio in &self.ratio_list {
            if !(ratio.is_finite() && ratio > 0.0) {
                return bad(format!("ratio must be positive and finite, got {ratio}"));
            }
        }
        for &n in &self.n_list {
            if n <= self.s0 {
                return bad(format!("n = {n} must exceed s0 = {}", self.s0));
            }
            for &ratio in &self.ratio_list {
                let p = implied_p(n, ratio);
                if p < self.s0 {
                    return bad(format!("ratio {ratio} with n = {n} gives p = {p} < s0 = {}", self.s0));
                }
            }
        }
        if self.methods.contains(&Method::Tiger) {
            self.tiger.validate().map_err(|e| SimulationError::InvalidConfig(e.to_string()))?;
            if let Some(&n) = self.n_list.iter().find(|&&n| n < 2 * self.tiger.k_folds) {
                return bad(format!("n = {n} is too small for {}-fold cross-validation", self.tiger.k_folds));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub ratio: f64,
    pub p: usize,
    pub method: Method,
    pub rel_bias_mean: f64,
    pub rel_bias_sd: f64,
    pub abs_bias_mean: f64,
    pub abs_bias_sd: f64,
    pub failures: usize,
    /// Mean of each estimated first-column nonzero across replications.
    pub component_means: Vec<f64>,
    pub component_sds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub s0: usize,
    pub rows: Vec<StudyRow>,
}

/// First-column nonzero block estimated by `method` from one data set.
fn first_column_estimate(
    x: &crate::linalg::DenseMatrix,
    s0: usize,
    method: Method,
    tiger: &TigerConfig,
) -> Result<Vec<f64>, SimulationError> {
    match method {
        Method::Proposed => {
            let support: Vec<usize> = (0..s0).collect();
            let block = sample_covariance_subset(x, &support)?;
            Ok(solve_block(&block, 0, 0)?)
        }
        Method::Tiger => {
            let fit = cross_validate(x, tiger)?;
            Ok((0..s0).map(|r| fit.omega_hat[(r, 0)]).collect())
        }
    }
}

fn aggregate(
    n: usize,
    ratio: f64,
    p: usize,
    method: Method,
    outcomes: &[Outcome],
    s0: usize,
) -> StudyRow {
    let ok: Vec<&(Vec<f64>, BiasMetrics)> = outcomes.iter().flatten().collect();
    let rel: Vec<f64> = ok.iter().map(|(_, b)| b.rel_bias).collect();
    let abs: Vec<f64> = ok.iter().map(|(_, b)| b.abs_bias).collect();
    let (rel_bias_mean, rel_bias_sd) = mean_sd(&rel);
    let (abs_bias_mean, abs_bias_sd) = mean_sd(&abs);
    let (component_means, component_sds) = (0..s0)
        .map(|k| mean_sd(&ok.iter().map(|(w, _)| w[k]).collect::<Vec<_>>()))
        .unzip();
    StudyRow {
        n,
        ratio,
        p,
        method,
        rel_bias_mean,
        rel_bias_sd,
        abs_bias_mean,
        abs_bias_sd,
        failures: outcomes.len() - ok.len(),
        component_means,
        component_sds,
    }
}

/// Monte Carlo bias study of the first column over every `(n, ratio, method)`
/// scenario. Each replication draws one data set that all methods share.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult, SimulationError> {
    cfg.validate()?;
    let truth = super::banded_first_column(cfg.s0, cfg.rho);
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        for &ratio in &cfg.ratio_list {
            let p = implied_p(n, ratio);
            let model = BandedModel::new(p, cfg.s0, cfg.rho)?;
            let scenario = [n as u64, ratio.to_bits()];
            // outcomes[r][method]
            let outcomes: Vec<Vec<Outcome>> = (0..cfg.replications)
                .into_par_iter()
                .map(|r| {
                    let x = model.sample(n, derive_seed(cfg.seed, &[scenario[0], scenario[1], DATA_TAG, r as u64]));
                    cfg.methods
                        .iter()
                        .map(|&method| {
                            let tiger = TigerConfig {
                                seed: derive_seed(cfg.seed, &[scenario[0], scenario[1], method.key(), r as u64]),
                                ..cfg.tiger
                            };
                            let w = first_column_estimate(&x, cfg.s0, method, &tiger).ok()?;
                            let b = bias_metrics(&w, &truth).ok()?;
                            Some((w, b))
                        })
                        .collect()
                })
                .collect();
            for (k, &method) in cfg.methods.iter().enumerate() {
                let per_method: Vec<_> = outcomes.iter().map(|o| o[k].clone()).collect();
                rows.push(aggregate(n, ratio, p, method, &per_method, cfg.s0));
            }
        }
    }
    Ok(StudyResult { s0: cfg.s0, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(methods: Vec<Method>) -> StudyConfig {
        StudyConfig {
            n_list: vec![60],
            ratio_list: vec![0.1, 0.5],
            replications: 8,
            methods,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn method_round_trip() {
        for m in [Method::Proposed, Method::Tiger] {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert_eq!(" TIGER ".parse::<Method>().unwrap(), Method::Tiger);
        assert!("glasso".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(StudyConfig::default().validate().is_ok());
        assert!(StudyConfig { replications: 1, ..StudyConfig::default() }.validate().is_err());
        // p = round(0.1 * 30) = 3 < s0
        assert!(StudyConfig { n_list: vec![30], ..StudyConfig::default() }.validate().is_err());
        assert!(StudyConfig { rho: 1.0, ..StudyConfig::default() }.validate().is_err());
        let tiny = StudyConfig { n_list: vec![8], s0: 1, methods: vec![Method::Tiger], ..StudyConfig::default() };
        assert!(tiny.validate().is_err());
        assert_eq!(implied_p(100, 0.5), 50);
        assert_eq!(implied_p(300, 0.1), 30);
    }

    #[test]
    fn rows_per_scenario_and_method() {
        let res = run_study(&small(vec![Method::Proposed, Method::Tiger])).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert_eq!(res.rows[0].method, Method::Proposed);
        assert_eq!(res.rows[1].method, Method::Tiger);
        assert_eq!(res.rows[2].p, 30);
        for row in &res.rows {
            assert_eq!(row.failures, 0);
            assert_eq!(row.component_means.len(), 4);
            assert!(row.rel_bias_sd >= 0.0 && row.abs_bias_sd >= 0.0);
            assert!(row.component_sds.iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn deterministic_and_paired() {
        let a = run_study(&small(vec![Method::Proposed, Method::Tiger])).unwrap();
        let b = run_study(&small(vec![Method::Proposed, Method::Tiger])).unwrap();
        assert_eq!(a, b);
        // the proposed rows do not depend on which other methods run
        let c = run_study(&small(vec![Method::Proposed])).unwrap();
        assert_eq!(c.rows[0], a.rows[0]);
        assert_eq!(c.rows[1], a.rows[2]);
    }
}
