//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage, configuration, parse and I/O
//! errors, 3 for numerical failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::estimator::{estimate_precision, sample_covariance, EstimatorError};
use crate::linalg::{DenseMatrix, LinalgError};
use crate::normal::two_sided_critical;
use crate::simulation::{
    comparison_table, format_number, make_ground_truth, normality_study, run_study, study_csv, study_table, Method,
    SimulationError, StudyConfig,
};
use crate::structure::GraphStructure;
use crate::tiger::{cross_validate, TigerConfig, TigerError};

#[derive(Debug, Parser)]
#[command(name = "graphprec", version, about = "Precision matrix estimation with a known graphical structure")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a precision matrix from a data file.
    Estimate(EstimateArgs),
    /// Run the Monte Carlo bias study.
    Simulate(SimulateArgs),
    /// Paired comparison of the proposed estimator and TIGER.
    Compare(CompareArgs),
    /// Sampling distribution of the standardized linear statistic.
    Normality(NormalityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Proposed,
    Tiger,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Proposed => Method::Proposed,
            MethodArg::Tiger => Method::Tiger,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructureFormat {
    /// Dense if the file is a square 0/1 table matching the data width, else edge list.
    Auto,
    Dense,
    Edges,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Data CSV, n rows by p columns, no header.
    #[arg(long)]
    pub data: PathBuf,
    /// Structure file: dense 0/1 adjacency CSV or an "i,j" edge list.
    #[arg(long)]
    pub structure: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    pub structure_format: StructureFormat,
    #[arg(long, value_enum, default_value = "proposed")]
    pub method: MethodArg,
    /// Replace the estimate by (Ω̂ + Ω̂ᵀ)/2.
    #[arg(long)]
    pub symmetrize: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub k_folds: usize,
    #[arg(long, default_value_t = 5)]
    pub n_lambda: usize,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,300,500")]
    pub n_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1,5,10")]
    pub ratio_list: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub s0: usize,
    #[arg(long, default_value_t = 0.6)]
    pub rho: f64,
    #[arg(long, default_value_t = 300)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub k_folds: usize,
    #[arg(long, default_value_t = 5)]
    pub n_lambda: usize,
    /// Output CSV; the aligned table is written next to it with a .txt extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "proposed")]
    pub method: Vec<MethodArg>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub study: StudyArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "proposed,tiger")]
    pub methods: Vec<MethodArg>,
}

#[derive(Debug, Args)]
pub struct NormalityArgs {
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    #[arg(long, default_value_t = 4)]
    pub s0: usize,
    #[arg(long, default_value_t = 0.6)]
    pub rho: f64,
    /// Column index (0-based).
    #[arg(long, default_value_t = 0)]
    pub column: usize,
    /// Linear functional over the column's support (default: indicator of the column itself).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub m: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Additional confidence level whose coverage is reported.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Output CSV of z statistics, one per line; a JSON summary is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }
}

fn linalg_error(e: LinalgError) -> CliError {
    match e {
        LinalgError::NotPositiveDefinite { .. } | LinalgError::NonFinite { .. } => CliError::Numerical(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::SubmatrixNotPD { .. } | EstimatorError::NonPositive => CliError::Numerical(e.to_string()),
            EstimatorError::Linalg(l) => linalg_error(l),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<TigerError> for CliError {
    fn from(e: TigerError) -> Self {
        match e {
            TigerError::DidNotConverge { .. }
            | TigerError::DegenerateResidual { .. }
            | TigerError::AllFoldsDegenerate
            | TigerError::ZeroVarianceColumn { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Linalg(l) => linalg_error(l),
            SimulationError::Estimator(e) => e.into(),
            SimulationError::Tiger(e) => e.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a global pool can only be installed once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Normality(a) => cmd_normality(&a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Trimmed comma-separated fields of every non-blank line, with 1-based
/// line numbers.
fn read_records(path: &Path) -> Result<Vec<(u64, Vec<String>)>, CliError> {
    let text = read_text(path)?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| (k as u64 + 1, l.split(',').map(|f| f.trim().to_string()).collect()))
        .collect())
}

/// Numeric CSV without header into an `n × p` matrix.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix, CliError> {
    let records = read_records(path)?;
    let Some((_, first)) = records.first() else {
        return Err(CliError::Usage(format!("{}: no data rows", path.display())));
    };
    let width = first.len();
    let mut data = Vec::with_capacity(records.len() * width);
    for (line, fields) in &records {
        if fields.len() != width {
            return Err(CliError::Usage(format!(
                "{}:{line}: expected {width} fields, found {}",
                path.display(),
                fields.len()
            )));
        }
        for (k, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                CliError::Usage(format!("{}:{line}: field {} is not a number: '{f}'", path.display(), k + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Usage(format!("{}:{line}: field {} is not finite", path.display(), k + 1)));
            }
            data.push(v);
        }
    }
    DenseMatrix::new(records.len(), width, data).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn looks_dense(records: &[(u64, Vec<String>)], p: usize) -> bool {
    records.len() == p && records.iter().all(|(_, f)| f.len() == p && f.iter().all(|v| v == "0" || v == "1"))
}

/// Structure for `p` variables from a dense adjacency or an edge list.
pub fn read_structure(path: &Path, p: usize, format: StructureFormat) -> Result<GraphStructure, CliError> {
    let records = read_records(path)?;
    let dense = match format {
        StructureFormat::Dense => true,
        StructureFormat::Edges => false,
        StructureFormat::Auto => looks_dense(&records, p),
    };
    let at = |line: u64, msg: String| CliError::Usage(format!("{}:{line}: {msg}", path.display()));
    if dense {
        if records.len() != p {
            return Err(CliError::Usage(format!(
                "{}: adjacency has {} rows but the data has {p} columns",
                path.display(),
                records.len()
            )));
        }
        let mut a = DenseMatrix::zeros(p, p);
        for (i, (line, fields)) in records.iter().enumerate() {
            if fields.len() != p {
                return Err(at(*line, format!("expected {p} fields, found {}", fields.len())));
            }
            for (j, f) in fields.iter().enumerate() {
                a[(i, j)] = f.parse().map_err(|_| at(*line, format!("field {} is not a number: '{f}'", j + 1)))?;
            }
        }
        GraphStructure::from_adjacency(&a).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    } else {
        let mut edges = Vec::with_capacity(records.len());
        for (line, fields) in &records {
            if fields.len() != 2 {
                return Err(at(*line, format!("expected an 'i,j' pair, found {} fields", fields.len())));
            }
            let idx = |f: &String| -> Result<usize, CliError> {
                let v: usize = f.parse().map_err(|_| at(*line, format!("'{f}' is not a 0-based index")))?;
                if v >= p {
                    return Err(at(*line, format!("index {v} out of range for {p} variables")));
                }
                Ok(v)
            };
            edges.push((idx(&fields[0])?, idx(&fields[1])?));
        }
        GraphStructure::from_edges(p, &edges).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

pub fn matrix_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let cells: Vec<String> = m.row(i).iter().map(|&v| format_number(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the target directory, renamed on success.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// `out` with its extension replaced by `ext`, or with `.ext` appended when
/// that would collide with `out` itself.
pub fn companion_path(out: &Path, ext: &str) -> PathBuf {
    let p = out.with_extension(ext);
    if p == out {
        let mut s = out.as_os_str().to_owned();
        s.push(format!(".{ext}"));
        PathBuf::from(s)
    } else {
        p
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    method: &'a str,
    symmetrized: bool,
    n: usize,
    p: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_column_condition: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chosen_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv_losses: Option<Vec<CvLoss>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_column_tau: Option<&'a [f64]>,
}

#[derive(Serialize)]
struct CvLoss {
    lambda: f64,
    loss: Option<f64>,
}

fn tiger_config(seed: u64, k_folds: usize, n_lambda: usize) -> TigerConfig {
    TigerConfig { seed, k_folds, n_lambda, ..TigerConfig::default() }
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<(), CliError> {
    let method = Method::from(a.method);
    if method == Method::Proposed && a.structure.is_none() {
        return Err(CliError::Usage("method 'proposed' requires --structure".into()));
    }
    let x = read_matrix(&a.data)?;
    let (n, p) = x.shape();
    let (omega, report_json) = match method {
        Method::Proposed => {
            let g = read_structure(a.structure.as_deref().expect("checked above"), p, a.structure_format)?;
            let s = sample_covariance(&x)?;
            let est = estimate_precision(&s, &g, a.symmetrize)?;
            let report = EstimateReport {
                method: method.tag(),
                symmetrized: a.symmetrize,
                n,
                p,
                per_column_condition: Some(&est.per_column_condition),
                chosen_lambda: None,
                cv_losses: None,
                per_column_tau: None,
            };
            let json = to_json(&report);
            (est.omega_hat, json)
        }
        Method::Tiger => {
            let cfg = tiger_config(a.seed, a.k_folds, a.n_lambda);
            let fit = cross_validate(&x, &cfg)?;
            let omega = if a.symmetrize { fit.omega_hat.symmetrized() } else { fit.omega_hat.clone() };
            let report = EstimateReport {
                method: method.tag(),
                symmetrized: a.symmetrize,
                n,
                p,
                per_column_condition: None,
                chosen_lambda: Some(fit.chosen_lambda),
                cv_losses: Some(
                    fit.cv_losses
                        .iter()
                        .map(|&(lambda, loss)| CvLoss { lambda, loss: loss.is_finite().then_some(loss) })
                        .collect(),
                ),
                per_column_tau: Some(&fit.per_column_tau),
            };
            let json = to_json(&report);
            (omega, json)
        }
    };
    write_atomic(&a.out, &matrix_csv(&omega))?;
    write_atomic(&companion_path(&a.out, "json"), &report_json)?;
    Ok(())
}

fn study_config(s: &StudyArgs, methods: Vec<Method>) -> StudyConfig {
    StudyConfig {
        n_list: s.n_list.clone(),
        ratio_list: s.ratio_list.clone(),
        s0: s.s0,
        rho: s.rho,
        replications: s.reps,
        seed: s.seed,
        methods,
        tiger: tiger_config(s.seed, s.k_folds, s.n_lambda),
    }
}

fn dedup_methods(m: &[MethodArg]) -> Vec<Method> {
    let mut out: Vec<Method> = Vec::new();
    for &x in m {
        let x = Method::from(x);
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let cfg = study_config(&a.study, dedup_methods(&a.method));
    let result = run_study(&cfg)?;
    let table = study_table(&result);
    write_atomic(&a.study.out, &study_csv(&result))?;
    write_atomic(&companion_path(&a.study.out, "txt"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let methods = dedup_methods(&a.methods);
    if !(methods.contains(&Method::Proposed) && methods.contains(&Method::Tiger)) {
        return Err(CliError::Usage("compare needs --methods proposed,tiger".into()));
    }
    let cfg = study_config(&a.study, vec![Method::Proposed, Method::Tiger]);
    let result = run_study(&cfg)?;
    let table = comparison_table(&result);
    write_atomic(&a.study.out, &study_csv(&result))?;
    write_atomic(&companion_path(&a.study.out, "txt"), &table)?;
    print!("{table}");
    Ok(())
}

#[derive(Serialize)]
struct NormalitySummary {
    n: usize,
    p: usize,
    s0: usize,
    column: usize,
    m: Vec<f64>,
    replications: usize,
    mean: Option<f64>,
    variance: Option<f64>,
    coverage95: Option<f64>,
    level: f64,
    coverage: Option<f64>,
}

fn fmt3(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
}

pub fn cmd_normality(a: &NormalityArgs) -> Result<(), CliError> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Usage(format!("--level must lie strictly between 0 and 1, got {}", a.level)));
    }
    let gt = make_ground_truth(a.p, a.s0, a.rho)?;
    if a.column >= a.p {
        return Err(CliError::Usage(format!("--column {} out of range for p = {}", a.column, a.p)));
    }
    let map = gt.structure.selection(a.column).map_err(|e| CliError::Usage(e.to_string()))?;
    let m = match &a.m {
        Some(m) if m.len() != map.len() => {
            return Err(CliError::Usage(format!(
                "--m has {} entries but column {} has a support of size {}",
                m.len(),
                a.column,
                map.len()
            )))
        }
        Some(m) => m.clone(),
        None => map.indicator(),
    };
    let res = normality_study(&gt, a.n, &m, a.column, a.reps, a.seed)?;
    let crit = two_sided_critical(a.level);
    let coverage = (!res.z_samples.is_empty())
        .then(|| res.z_samples.iter().filter(|z| z.abs() <= crit).count() as f64 / res.z_samples.len() as f64);
    let csv: String = res.z_samples.iter().map(|&z| format_number(z) + "\n").collect();
    let summary = NormalitySummary {
        n: a.n,
        p: a.p,
        s0: a.s0,
        column: a.column,
        m,
        replications: a.reps,
        mean: res.mean,
        variance: res.variance,
        coverage95: res.coverage95,
        level: a.level,
        coverage,
    };
    write_atomic(&a.out, &csv)?;
    write_atomic(&companion_path(&a.out, "json"), &to_json(&summary))?;
    println!("replications: {}", a.reps);
    println!("mean: {}", fmt3(res.mean));
    println!("variance: {}", fmt3(res.variance));
    println!("coverage95: {}", fmt3(res.coverage95));
    if a.level != 0.95 {
        println!("coverage at {}: {}", a.level, fmt3(coverage));
    }
    Ok(())
}
