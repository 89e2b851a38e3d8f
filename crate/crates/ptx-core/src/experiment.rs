//! Reproducible experiment grids behind the `ptx` CLI: the simulated transfer
//! study, gamma and epsilon sweeps, and the eigenspectrum tool.
//!
//! A run is a cross product of grid axes. Every cell derives its own RNG seed
//! from the base seed and the cell key (see [`crate::seed`]), so results do
//! not depend on execution order or on how many worker threads ran the grid.
//! Cells that fail (say, a batch size larger than the private sample) become
//! rows with the `error` column set; the rest of the grid still completes.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::PrivacyBudget;
use crate::dpsgd::{dpsgd_fit, ols_fit, DpSgdConfig};
use crate::error::{Error, Result};
use crate::linalg::{perturbed_basis, symmetric_eigen_descending};
use crate::model::{random_instance, RegressionInstance};
use crate::seed::{derive_seed, float_word};
use crate::two_phase::{two_phase_transfer, SubspaceSource};

/// Column order of the results CSV. Pinned by a golden-file test; changing it
/// is a breaking change for downstream plotting scripts.
pub const RESULT_HEADER: [&str; 11] = [
    "method",
    "n1",
    "n2",
    "eps",
    "gamma",
    "trial",
    "seed",
    "l2_param_error",
    "excess_risk",
    "sin_theta",
    "error",
];

/// Estimators the harness can run on a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NonprivateOls,
    DpsgdScratch,
    DpsgdTrueSubspace,
    TwoPhaseMom,
    TwoPhaseOracleGamma,
}

impl Method {
    /// Stable tag absorbed into the per-cell seed. Never renumber.
    pub fn tag(self) -> u64 {
        match self {
            Method::NonprivateOls => 1,
            Method::DpsgdScratch => 2,
            Method::DpsgdTrueSubspace => 3,
            Method::TwoPhaseMom => 4,
            Method::TwoPhaseOracleGamma => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::NonprivateOls => "nonprivate_ols",
            Method::DpsgdScratch => "dpsgd_scratch",
            Method::DpsgdTrueSubspace => "dpsgd_true_subspace",
            Method::TwoPhaseMom => "two_phase_mom",
            Method::TwoPhaseOracleGamma => "two_phase_oracle_gamma",
        }
    }

    /// Nonprivate fits have no meaningful epsilon; their rows collapse the
    /// epsilon axis instead of carrying a value the accountant would refute.
    fn uses_eps(self) -> bool {
        !matches!(self, Method::NonprivateOls)
    }

    fn uses_gamma(self) -> bool {
        matches!(self, Method::TwoPhaseOracleGamma)
    }
}

/// Full description of an experiment grid. Deserialized from the JSON config
/// file; every field is echoed back into the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Ambient dimension.
    pub d: usize,
    /// Shared subspace dimension.
    pub k: usize,
    /// Number of public tasks.
    pub t: usize,
    /// Public sample sizes to sweep.
    pub n1_list: Vec<usize>,
    /// Private sample size.
    pub n2: usize,
    /// Optional sweep over private sample sizes; overrides `n2` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2_list: Option<Vec<usize>>,
    /// Label noise standard deviation.
    pub noise_std: f64,
    /// Norm of every task vector.
    pub task_norm: f64,
    /// Privacy budgets to sweep.
    pub eps_list: Vec<f64>,
    /// Failure probability shared by all budgets.
    pub delta: f64,
    /// DP-SGD schedule. `noise_multiplier` is ignored: each cell calibrates
    /// noise to its row's (eps, delta) target.
    pub dp: DpSgdConfig,
    /// Estimators to run.
    pub methods: Vec<Method>,
    /// Oracle subspace errors; required iff `two_phase_oracle_gamma` runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_list: Option<Vec<f64>>,
    /// Independent repetitions per cell.
    pub trials: u32,
    /// Root of the per-cell seed derivation.
    pub base_seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 || self.k > self.d {
            return fail(format!("need 1 <= k <= d, got d={}, k={}", self.d, self.k));
        }
        if self.t == 0 {
            return fail("t must be positive".into());
        }
        if self.n1_list.is_empty() || self.n1_list.iter().any(|&n| n == 0) {
            return fail("n1_list must be nonempty with positive entries".into());
        }
        if self.n2 == 0 {
            return fail("n2 must be positive".into());
        }
        if let Some(list) = &self.n2_list {
            if list.is_empty() || list.iter().any(|&n| n == 0) {
                return fail("n2_list must be nonempty with positive entries".into());
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return fail(format!("noise_std must be finite and >= 0, got {}", self.noise_std));
        }
        if !(self.task_norm > 0.0 && self.task_norm.is_finite()) {
            return fail(format!("task_norm must be finite and > 0, got {}", self.task_norm));
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return fail("eps_list must be nonempty with finite positive entries".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.methods.is_empty() {
            return fail("methods must be nonempty".into());
        }
        let mut seen = HashSet::new();
        for m in &self.methods {
            if !seen.insert(*m) {
                return fail(format!("duplicate method {}", m.name()));
            }
        }
        if self.methods.contains(&Method::TwoPhaseOracleGamma) {
            match &self.gamma_list {
                Some(gs) if !gs.is_empty() => {
                    for &g in gs {
                        if !((0.0..=1.0).contains(&g) && g.is_finite()) {
                            return fail(format!("gamma {g} outside [0, 1]"));
                        }
                    }
                }
                _ => {
                    return fail(
                        "two_phase_oracle_gamma needs a nonempty gamma_list".into(),
                    )
                }
            }
        }
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        if !(self.dp.clip_norm > 0.0 && self.dp.clip_norm.is_finite()) {
            return fail(format!("dp.clip_norm must be finite and > 0, got {}", self.dp.clip_norm));
        }
        if !(self.dp.learning_rate > 0.0 && self.dp.learning_rate.is_finite()) {
            return fail(format!(
                "dp.learning_rate must be finite and > 0, got {}",
                self.dp.learning_rate
            ));
        }
        if self.dp.batch_size == 0 {
            return fail("dp.batch_size must be positive".into());
        }
        Ok(())
    }

    /// The private sample sizes the grid actually sweeps.
    pub fn n2_values(&self) -> Vec<usize> {
        self.n2_list.clone().unwrap_or_else(|| vec![self.n2])
    }
}

/// One grid cell's outcome. `eps` is empty for nonprivate rows and `gamma`
/// is empty except for the oracle-gamma method; metric columns are empty on
/// failed cells, whose `error` column holds the message instead.
#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub method: Method,
    pub n1: usize,
    pub n2: usize,
    pub eps: Option<f64>,
    pub gamma: Option<f64>,
    pub trial: u32,
    pub seed: u64,
    pub l2_param_error: Option<f64>,
    pub excess_risk: Option<f64>,
    pub sin_theta: Option<f64>,
    /// Cell wall-clock time. Kept out of the CSV so reruns are byte-identical.
    pub wall_ms: u64,
    pub error: Option<String>,
}

/// Cell key in canonical order. The CSV is emitted in exactly this order.
#[derive(Debug, Clone, Copy)]
struct Cell {
    method: Method,
    n1: usize,
    n2: usize,
    eps: Option<f64>,
    gamma: Option<f64>,
    trial: u32,
    seed: u64,
}

/// Expands the grid in canonical order (methods as listed, then n1, n2, eps,
/// gamma, trial) and derives each cell's seed. Fails on a seed collision so a
/// degenerate grid cannot silently reuse randomness.
fn enumerate_cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let n2s = cfg.n2_values();
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        let eps_axis: Vec<Option<f64>> = if method.uses_eps() {
            cfg.eps_list.iter().map(|&e| Some(e)).collect()
        } else {
            vec![None]
        };
        let gamma_axis: Vec<Option<f64>> = if method.uses_gamma() {
            cfg.gamma_list
                .as_ref()
                .expect("validated")
                .iter()
                .map(|&g| Some(g))
                .collect()
        } else {
            vec![None]
        };
        for &n1 in &cfg.n1_list {
            for &n2 in &n2s {
                for &eps in &eps_axis {
                    for &gamma in &gamma_axis {
                        for trial in 0..cfg.trials {
                            let seed = derive_seed(
                                cfg.base_seed,
                                &[
                                    method.tag(),
                                    n1 as u64,
                                    n2 as u64,
                                    float_word(eps),
                                    float_word(gamma),
                                    trial as u64,
                                ],
                            );
                            cells.push(Cell { method, n1, n2, eps, gamma, trial, seed });
                        }
                    }
                }
            }
        }
    }
    let mut seen = HashSet::with_capacity(cells.len());
    for c in &cells {
        if !seen.insert(c.seed) {
            return Err(Error::InvalidConfig(format!(
                "cell seed collision at method={} n1={} n2={} trial={}; grid axes hash to a reused stream",
                c.method.name(),
                c.n1,
                c.n2,
                c.trial
            )));
        }
    }
    Ok(cells)
}

struct CellMetrics {
    l2_param_error: f64,
    excess_risk: f64,
    sin_theta: Option<f64>,
}

/// Runs one cell start to finish on its own RNG stream: draw the instance,
/// draw the data the method consumes, fit, score against the truth.
fn execute_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<CellMetrics> {
    let mut rng = ChaCha8Rng::seed_from_u64(cell.seed);
    let inst = random_instance(cfg.d, cfg.k, cfg.t, cfg.noise_std, cfg.task_norm, &mut rng)?;
    let budget = match cell.eps {
        Some(eps) => Some(PrivacyBudget::new(eps, cfg.delta)?),
        None => None,
    };

    let score = |inst: &RegressionInstance,
                 w: &nalgebra::DVector<f64>,
                 sin_theta: Option<f64>|
     -> Result<CellMetrics> {
        let theta = inst.private_parameter();
        Ok(CellMetrics {
            l2_param_error: (w - &theta).norm(),
            excess_risk: inst.population_excess_risk(w)?,
            sin_theta,
        })
    };

    match cell.method {
        Method::NonprivateOls => {
            let private = inst.sample_private(cell.n2, &mut rng);
            let fit = ols_fit(&private)?;
            score(&inst, &fit.weights, None)
        }
        Method::DpsgdScratch => {
            let private = inst.sample_private(cell.n2, &mut rng);
            let fit = dpsgd_fit(&private, &cfg.dp, budget.as_ref(), &mut rng)?;
            score(&inst, &fit.weights, None)
        }
        Method::DpsgdTrueSubspace => {
            let private = inst.sample_private(cell.n2, &mut rng);
            let source = SubspaceSource::Oracle(inst.basis().clone());
            let res = two_phase_transfer(
                &source,
                &private,
                cfg.k,
                &cfg.dp,
                budget.as_ref(),
                Some(&inst),
                &mut rng,
            )?;
            score(&inst, &res.lifted, res.sin_theta)
        }
        Method::TwoPhaseMom => {
            let public = inst.sample_public(cell.n1, &mut rng);
            let private = inst.sample_private(cell.n2, &mut rng);
            let source = SubspaceSource::PublicMom(&public);
            let res = two_phase_transfer(
                &source,
                &private,
                cfg.k,
                &cfg.dp,
                budget.as_ref(),
                Some(&inst),
                &mut rng,
            )?;
            score(&inst, &res.lifted, res.sin_theta)
        }
        Method::TwoPhaseOracleGamma => {
            // Rotate coordinates so the private task rides the first basis
            // column; perturbing that column by gamma then makes the
            // population bias exactly (gamma * task_norm)^2 / 2, which is
            // what the sweep's plateau band is calibrated against.
            let inst = inst.with_private_task_on_first_axis()?;
            let gamma = cell.gamma.expect("oracle-gamma cell carries gamma");
            let bhat = perturbed_basis(inst.basis(), gamma, &mut rng)?;
            let private = inst.sample_private(cell.n2, &mut rng);
            let source = SubspaceSource::Oracle(bhat);
            let res = two_phase_transfer(
                &source,
                &private,
                cfg.k,
                &cfg.dp,
                budget.as_ref(),
                Some(&inst),
                &mut rng,
            )?;
            score(&inst, &res.lifted, res.sin_theta)
        }
    }
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> TrialResult {
    let start = Instant::now();
    let outcome = execute_cell(cfg, cell);
    let wall_ms = start.elapsed().as_millis() as u64;
    let mut row = TrialResult {
        method: cell.method,
        n1: cell.n1,
        n2: cell.n2,
        eps: cell.eps,
        gamma: cell.gamma,
        trial: cell.trial,
        seed: cell.seed,
        l2_param_error: None,
        excess_risk: None,
        sin_theta: None,
        wall_ms,
        error: None,
    };
    match outcome {
        Ok(m) => {
            row.l2_param_error = Some(m.l2_param_error);
            row.excess_risk = Some(m.excess_risk);
            row.sin_theta = m.sin_theta;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs the full grid. Rows come back in canonical order regardless of how
/// the thread pool scheduled the cells.
fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    let cells = enumerate_cells(cfg)?;
    Ok(cells.par_iter().map(|c| run_cell(cfg, c)).collect())
}

/// The simulated transfer study: every configured method over the
/// (n1, n2, eps, trial) grid.
pub fn run_figure4(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    run_grid(cfg)
}

/// Bias sweep: requires the oracle-gamma method so subspace quality is the
/// controlled variable.
pub fn run_gamma_sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    if !cfg.methods.contains(&Method::TwoPhaseOracleGamma) {
        return Err(Error::InvalidConfig(
            "gamma sweep needs method two_phase_oracle_gamma".into(),
        ));
    }
    run_grid(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes rows under [`RESULT_HEADER`]. Identical rows produce identical
/// bytes: floats print in shortest round-trip form and no timing column is
/// emitted.
pub fn write_results_csv<W: Write>(out: W, rows: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record(&[
            r.method.name().to_string(),
            r.n1.to_string(),
            r.n2.to_string(),
            fmt_opt(r.eps),
            fmt_opt(r.gamma),
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_opt(r.l2_param_error),
            fmt_opt(r.excess_risk),
            fmt_opt(r.sin_theta),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run provenance emitted next to the CSV: config echo, crate version, grid
/// size, failure count, wall time.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    /// Private sample sizes the grid swept (resolves `n2` vs `n2_list`).
    pub n2_values: Vec<usize>,
    pub total_cells: usize,
    pub failed_cells: usize,
    pub wall_ms: u64,
}

impl RunManifest {
    pub fn new(
        command: &str,
        cfg: &ExperimentConfig,
        rows: &[TrialResult],
        wall_ms: u64,
    ) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: cfg.clone(),
            n2_values: cfg.n2_values(),
            total_cells: rows.len(),
            failed_cells: rows.iter().filter(|r| r.error.is_some()).count(),
            wall_ms,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads a feature matrix from CSV: rows are samples, columns are feature
/// dimensions. `has_header: None` sniffs the first row (a row that fails to
/// parse as all-numeric is taken as a header); `Some(true)` always skips the
/// first row; `Some(false)` requires every row to be numeric.
pub fn read_feature_matrix<R: Read>(input: R, has_header: Option<bool>) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|s| s.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                if i == 0 {
                    if has_header == Some(true) {
                        continue;
                    }
                    width = vals.len();
                } else if vals.len() != width && !(i == 1 && width == 0) {
                    return Err(Error::MalformedCsv(format!(
                        "row {} has {} fields, expected {}",
                        i + 1,
                        vals.len(),
                        width
                    )));
                }
                if width == 0 {
                    width = vals.len();
                }
                rows.push(vals);
            }
            Err(e) => {
                // Only the first row may be non-numeric, and only when a
                // header is allowed.
                if i == 0 && has_header != Some(false) {
                    continue;
                }
                return Err(Error::MalformedCsv(format!("row {}: {}", i + 1, e)));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("no data rows in features CSV".into()));
    }
    if width == 0 {
        return Err(Error::EmptyInput("features CSV has zero columns".into()));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        width,
        rows.into_iter().flatten(),
    ))
}

/// Sample covariance of `data` (rows = samples). Centered uses the unbiased
/// 1/(n-1) normalization and needs n >= 2; uncentered is the raw second
/// moment with 1/n.
pub fn sample_covariance(data: &DMatrix<f64>, center: bool) -> Result<DMatrix<f64>> {
    let n = data.nrows();
    let p = data.ncols();
    if n == 0 || p == 0 {
        return Err(Error::EmptyInput("covariance of an empty matrix".into()));
    }
    if center {
        if n < 2 {
            return Err(Error::InvalidArgs(
                "centered covariance needs at least 2 samples".into(),
            ));
        }
        let mut centered = data.clone();
        for j in 0..p {
            let mean = data.column(j).sum() / n as f64;
            for i in 0..n {
                centered[(i, j)] -= mean;
            }
        }
        Ok(centered.transpose() * &centered / (n as f64 - 1.0))
    } else {
        Ok(data.transpose() * data / n as f64)
    }
}

/// Eigenvalues of the sample covariance, largest first.
pub fn eigenspectrum(data: &DMatrix<f64>, center: bool) -> Result<Vec<f64>> {
    let cov = sample_covariance(data, center)?;
    Ok(symmetric_eigen_descending(&cov)?.eigenvalues)
}

/// Writes `index,eigenvalue` rows (1-based, descending).
pub fn write_eigenvalues_csv<W: Write>(out: W, eigenvalues: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "eigenvalue"])?;
    for (i, v) in eigenvalues.iter().enumerate() {
        w.write_record(&[(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// File-to-file eigenspectrum pass: read features, decompose, write spectrum.
pub fn run_eigspec(
    input: &Path,
    output: &Path,
    has_header: Option<bool>,
    center: bool,
) -> Result<Vec<f64>> {
    let file = std::fs::File::open(input)?;
    let data = read_feature_matrix(std::io::BufReader::new(file), has_header)?;
    let eig = eigenspectrum(&data, center)?;
    let out = std::fs::File::create(output)?;
    write_eigenvalues_csv(std::io::BufWriter::new(out), &eig)?;
    Ok(eig)
}
