//! Ground-truth problem instances and i.i.d. sampling for the shared-subspace
//! regression model, plus the closed-form population risk.
//!
//! The generative model: covariates x are standard normal in R^d, and the label
//! for a point from task j is y = x^T B alpha_j + sigma z with z standard
//! normal. All task vectors alpha_j live in R^k and share the basis B, so every
//! regression parameter lies in one k-dimensional subspace.
//!
//! Gaussian draws use the ziggurat sampler from `rand_distr::StandardNormal`,
//! driven by explicitly seeded counter-based (ChaCha) streams supplied by the
//! caller. Sampling order is fixed (per row: d covariate draws, then one noise
//! draw), so a given seed always yields bitwise-identical data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_orthonormal, symmetric_eigen_descending, OrthonormalBasis};

/// A fully specified ground-truth instance: basis B (d x k), public task matrix
/// A (t x k, row j is alpha_j), label noise sigma, and the private task
/// alpha_{t+1} the transfer pipeline must learn.
#[derive(Debug, Clone)]
pub struct RegressionInstance {
    basis: OrthonormalBasis,
    tasks: DMatrix<f64>,
    noise_std: f64,
    private_task: DVector<f64>,
}

impl RegressionInstance {
    /// Assembles an instance from parts, validating shapes and finiteness.
    pub fn new(
        basis: OrthonormalBasis,
        tasks: DMatrix<f64>,
        noise_std: f64,
        private_task: DVector<f64>,
    ) -> Result<Self> {
        let k = basis.dim_sub();
        if tasks.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "task matrix has {} columns, basis rank is {k}",
                tasks.ncols()
            )));
        }
        if tasks.nrows() == 0 {
            return Err(Error::InvalidDims("need at least one public task".into()));
        }
        if private_task.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "private task has length {}, basis rank is {k}",
                private_task.len()
            )));
        }
        if !(noise_std >= 0.0) {
            return Err(Error::InvalidArgs(format!(
                "noise_std must be nonnegative, got {noise_std}"
            )));
        }
        if tasks.iter().any(|v| !v.is_finite()) || private_task.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgs("task vectors must be finite".into()));
        }
        Ok(Self {
            basis,
            tasks,
            noise_std,
            private_task,
        })
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    /// Public task matrix A, one row per task.
    pub fn tasks(&self) -> &DMatrix<f64> {
        &self.tasks
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn private_task(&self) -> &DVector<f64> {
        &self.private_task
    }

    pub fn dim_ambient(&self) -> usize {
        self.basis.dim_ambient()
    }

    pub fn dim_sub(&self) -> usize {
        self.basis.dim_sub()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.nrows()
    }

    /// Replaces the private task vector (stays in subspace coordinates).
    pub fn with_private_task(mut self, alpha: DVector<f64>) -> Result<Self> {
        if alpha.len() != self.dim_sub() {
            return Err(Error::DimensionMismatch(format!(
                "private task has length {}, basis rank is {}",
                alpha.len(),
                self.dim_sub()
            )));
        }
        self.private_task = alpha;
        Ok(self)
    }

    /// The d-dimensional regression parameter of the private task, B alpha_{t+1}.
    pub fn private_parameter(&self) -> DVector<f64> {
        self.basis.columns() * &self.private_task
    }

    /// Re-expresses the same instance in a rotated subspace coordinate system
    /// whose first basis column points along B alpha_{t+1}.
    ///
    /// Spans, data distributions, and risks are untouched (B' = BR, alpha' =
    /// R^T alpha for an orthogonal R). Useful when a perturbation is applied to
    /// the first basis column and should maximally affect the private task, the
    /// worst case for in-subspace bias.
    pub fn with_private_task_on_first_axis(&self) -> Result<Self> {
        let k = self.dim_sub();
        let norm = self.private_task.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgs(
                "cannot align axes to a zero private task".into(),
            ));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        // Complete alpha/|alpha| to an orthogonal R by QR against identity
        // columns, skipping the axis where alpha has its largest entry so the
        // completion matrix always has full rank.
        let skip = self
            .private_task
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let mut m = DMatrix::<f64>::zeros(k, k);
        m.set_column(0, &(&self.private_task / norm));
        let mut col = 1;
        for j in 0..k {
            if j != skip {
                m[(j, col)] = 1.0;
                col += 1;
            }
        }
        let r = crate::linalg::orthonormalize(&m)?;
        let mut r = r.into_columns();
        // QR's sign convention may have flipped the first column; undo so the
        // first rotated coordinate is exactly +|alpha|.
        if (r.column(0).dot(&self.private_task)) < 0.0 {
            r.column_mut(0).neg_mut();
        }
        let new_basis = OrthonormalBasis::from_columns(self.basis.columns() * &r)?;
        let new_tasks = &self.tasks * &r;
        let new_private = r.transpose() * &self.private_task;
        Self::new(new_basis, new_tasks, self.noise_std, new_private)
    }

    /// Labeled draws from the t public tasks with equal per-task allocation.
    ///
    /// If n1 is not divisible by t the remainder is dropped with a logged
    /// warning. Task indices cycle 1..=t, so counts stay exactly equal.
    pub fn sample_public<R: Rng + ?Sized>(&self, n1: usize, rng: &mut R) -> LabeledDataset {
        let t = self.n_tasks();
        if n1 % t != 0 {
            log::warn!(
                "sample_public: n1 = {n1} not divisible by t = {t}; dropping {} samples",
                n1 % t
            );
        }
        let n = (n1 / t) * t;
        // theta_j = B alpha_j, one row per task.
        let thetas = &self.tasks * self.basis.columns().transpose();
        self.sample_rows(n, rng, |i| {
            let task = i % t;
            (task + 1, thetas.row(task).transpose())
        })
    }

    /// Labeled draws from the private task (index t+1).
    pub fn sample_private<R: Rng + ?Sized>(&self, n2: usize, rng: &mut R) -> LabeledDataset {
        let theta = self.private_parameter();
        let t = self.n_tasks();
        self.sample_rows(n2, rng, |_| (t + 1, theta.clone()))
    }

    fn sample_rows<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
        theta_of_row: impl Fn(usize) -> (usize, DVector<f64>),
    ) -> LabeledDataset {
        let d = self.dim_ambient();
        let mut inputs = DMatrix::<f64>::zeros(n, d);
        let mut labels = DVector::<f64>::zeros(n);
        let mut task_index = Vec::with_capacity(n);
        for i in 0..n {
            let (task, theta) = theta_of_row(i);
            let mut dot = 0.0;
            for j in 0..d {
                let x: f64 = rng.sample(StandardNormal);
                inputs[(i, j)] = x;
                dot += x * theta[j];
            }
            let z: f64 = rng.sample(StandardNormal);
            labels[i] = dot + self.noise_std * z;
            task_index.push(task);
        }
        LabeledDataset {
            inputs,
            labels,
            task_index,
        }
    }

    /// Population excess risk of a d-dimensional predictor w.
    ///
    /// Under the isotropic Gaussian design this is exactly
    /// (1/2) |w - B alpha_{t+1}|^2; the noise floor cancels.
    pub fn population_excess_risk(&self, w: &DVector<f64>) -> Result<f64> {
        if w.len() != self.dim_ambient() {
            return Err(Error::DimensionMismatch(format!(
                "predictor length {} vs ambient dimension {}",
                w.len(),
                self.dim_ambient()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgs("predictor must be finite".into()));
        }
        Ok(0.5 * (w - self.private_parameter()).norm_squared())
    }

    /// Monte-Carlo cross-check of [`Self::population_excess_risk`]: averages
    /// (1/2)(x^T w - y)^2 - (1/2) sigma^2 over fresh private-task draws.
    pub fn monte_carlo_excess_risk<R: Rng + ?Sized>(
        &self,
        w: &DVector<f64>,
        n: usize,
        rng: &mut R,
    ) -> Result<MonteCarloEstimate> {
        if w.len() != self.dim_ambient() {
            return Err(Error::DimensionMismatch(format!(
                "predictor length {} vs ambient dimension {}",
                w.len(),
                self.dim_ambient()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidArgs("need at least 2 samples".into()));
        }
        let theta = self.private_parameter();
        let d = self.dim_ambient();
        let noise_floor = 0.5 * self.noise_std * self.noise_std;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let mut xw = 0.0;
            let mut xt = 0.0;
            for j in 0..d {
                let x: f64 = rng.sample(StandardNormal);
                xw += x * w[j];
                xt += x * theta[j];
            }
            let z: f64 = rng.sample(StandardNormal);
            let y = xt + self.noise_std * z;
            let v = 0.5 * (xw - y) * (xw - y) - noise_floor;
            sum += v;
            sumsq += v * v;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sumsq - nf * mean * mean).max(0.0) / (nf - 1.0);
        Ok(MonteCarloEstimate {
            value: mean,
            std_error: (var / nf).sqrt(),
        })
    }

    /// Task-diversity summary of the public task matrix, from the spectrum of
    /// A^T A / t. nu is its smallest eigenvalue, kappa its condition number
    /// relative to nu, kappa_bar the trace-average analogue. nu = 0 is a valid
    /// outcome (the tasks fail to span the subspace) and yields infinite ratios.
    pub fn diversity_stats(&self) -> DiversityStats {
        let t = self.n_tasks() as f64;
        let gram = self.tasks.transpose() * &self.tasks / t;
        let eig = symmetric_eigen_descending(&gram).expect("Gram matrix is symmetric");
        let k = self.dim_sub();
        // Clamp tiny negative roundoff; the Gram matrix is PSD by construction.
        let top = eig.eigenvalues[0].max(0.0);
        let nu = eig.eigenvalues[k - 1].max(0.0);
        let trace: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        DiversityStats {
            nu,
            kappa_bar: trace / (k as f64 * nu),
            kappa: top / nu,
        }
    }

    /// Effective label-noise variance seen by a regression constrained to the
    /// subspace of `bhat`: sigma^2 plus the energy of B alpha_{t+1} outside
    /// span(bhat).
    pub fn residual_noise_variance(&self, bhat: &OrthonormalBasis) -> Result<f64> {
        if bhat.dim_ambient() != self.dim_ambient() {
            return Err(Error::DimensionMismatch(format!(
                "bhat ambient dimension {} vs instance dimension {}",
                bhat.dim_ambient(),
                self.dim_ambient()
            )));
        }
        let theta = self.private_parameter();
        let outside = bhat.residual(&theta)?;
        Ok(self.noise_std * self.noise_std + outside.norm_squared())
    }
}

/// A mean estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Spectrum summary of A^T A / t. See [`RegressionInstance::diversity_stats`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiversityStats {
    pub nu: f64,
    pub kappa_bar: f64,
    pub kappa: f64,
}

/// Draws a random instance: Haar-like basis (QR of a Gaussian matrix), task
/// rows and private task drawn Gaussian and rescaled to exact norm `task_norm`.
pub fn random_instance<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    t: usize,
    noise_std: f64,
    task_norm: f64,
    rng: &mut R,
) -> Result<RegressionInstance> {
    if k == 0 || k > d {
        return Err(Error::InvalidDims(format!(
            "need 1 <= k <= d, got d={d}, k={k}"
        )));
    }
    if t == 0 {
        return Err(Error::InvalidDims("need t >= 1 public tasks".into()));
    }
    if !(task_norm >= 0.0) {
        return Err(Error::InvalidArgs(format!(
            "task_norm must be nonnegative, got {task_norm}"
        )));
    }
    let basis = random_orthonormal(d, k, rng)?;
    let mut tasks = DMatrix::<f64>::zeros(t, k);
    for j in 0..t {
        let row = random_with_norm(k, task_norm, rng);
        tasks.set_row(j, &row.transpose());
    }
    let private_task = random_with_norm(k, task_norm, rng);
    RegressionInstance::new(basis, tasks, noise_std, private_task)
}

fn random_with_norm<R: Rng + ?Sized>(k: usize, norm: f64, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if norm == 0.0 {
            return DVector::zeros(k);
        }
        if n > 0.0 {
            return v * (norm / n);
        }
    }
}

/// Rows of covariates with labels and 1-based task indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: DMatrix<f64>,
    labels: DVector<f64>,
    task_index: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(inputs: DMatrix<f64>, labels: DVector<f64>, task_index: Vec<usize>) -> Result<Self> {
        let n = inputs.nrows();
        if labels.len() != n || task_index.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "row counts disagree: {} inputs, {} labels, {} task indices",
                n,
                labels.len(),
                task_index.len()
            )));
        }
        if task_index.iter().any(|&t| t == 0) {
            return Err(Error::InvalidArgs("task indices are 1-based".into()));
        }
        Ok(Self {
            inputs,
            labels,
            task_index,
        })
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    pub fn task_index(&self) -> &[usize] {
        &self.task_index
    }

    /// True when every row carries the same task index.
    pub fn single_task(&self) -> bool {
        self.task_index.windows(2).all(|w| w[0] == w[1])
    }

    /// Writes `task_index,y,x_1..x_d` rows. Floats are printed with Rust's
    /// shortest round-trip formatting, so reading the file back reproduces the
    /// exact same bits.
    pub fn to_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.dim();
        let mut header = Vec::with_capacity(d + 2);
        header.push("task_index".to_string());
        header.push("y".to_string());
        for j in 1..=d {
            header.push(format!("x_{j}"));
        }
        w.write_record(&header)
            .map_err(|e| Error::MalformedCsv(e.to_string()))?;
        let mut record = Vec::with_capacity(d + 2);
        for i in 0..self.n() {
            record.clear();
            record.push(self.task_index[i].to_string());
            record.push(format!("{}", self.labels[i]));
            for j in 0..d {
                record.push(format!("{}", self.inputs[(i, j)]));
            }
            w.write_record(&record)
                .map_err(|e| Error::MalformedCsv(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Self::to_csv`].
    pub fn from_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| Error::MalformedCsv(e.to_string()))?
            .clone();
        if headers.len() < 3 || &headers[0] != "task_index" || &headers[1] != "y" {
            return Err(Error::MalformedCsv(format!(
                "expected header task_index,y,x_1..x_d; got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let d = headers.len() - 2;
        let mut rows: Vec<f64> = Vec::new();
        let mut labels = Vec::new();
        let mut task_index = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::MalformedCsv(e.to_string()))?;
            if rec.len() != d + 2 {
                return Err(Error::MalformedCsv(format!(
                    "row {}: expected {} fields, got {}",
                    line + 2,
                    d + 2,
                    rec.len()
                )));
            }
            let t: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::MalformedCsv(format!("row {}: bad task index", line + 2)))?;
            let y: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::MalformedCsv(format!("row {}: bad label", line + 2)))?;
            task_index.push(t);
            labels.push(y);
            for j in 0..d {
                let x: f64 = rec[j + 2].trim().parse().map_err(|_| {
                    Error::MalformedCsv(format!("row {}: bad covariate x_{}", line + 2, j + 1))
                })?;
                rows.push(x);
            }
        }
        if labels.is_empty() {
            return Err(Error::EmptyData("csv contains no data rows".into()));
        }
        let n = labels.len();
        let inputs = DMatrix::from_row_slice(n, d, &rows);
        Self::new(inputs, DVector::from_vec(labels), task_index)
    }

    pub fn write_csv_path<P: AsRef<std::path::Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.to_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv_path<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_csv(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::principal_angle_sin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_basis(d: usize, k: usize) -> OrthonormalBasis {
        OrthonormalBasis::from_columns(DMatrix::<f64>::identity(d, k)).unwrap()
    }

    #[test]
    fn random_instance_shapes_and_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = random_instance(25, 5, 100, 1.0, 1.0, &mut rng).unwrap();
        assert_eq!(inst.dim_ambient(), 25);
        assert_eq!(inst.dim_sub(), 5);
        assert_eq!(inst.n_tasks(), 100);
        for j in 0..100 {
            assert!((inst.tasks().row(j).norm() - 1.0).abs() < 1e-12);
        }
        assert!((inst.private_task().norm() - 1.0).abs() < 1e-12);
        assert!(inst.diversity_stats().nu > 0.0);
    }

    #[test]
    fn full_rank_instance_spans_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = random_instance(6, 6, 3, 0.5, 1.0, &mut rng).unwrap();
        let id = identity_basis(6, 6);
        assert!(principal_angle_sin(inst.basis(), &id).unwrap() <= 1e-10);
    }

    #[test]
    fn random_instance_is_deterministic() {
        let a = random_instance(10, 3, 7, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_instance(10, 3, 7, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.basis().columns(), b.basis().columns());
        assert_eq!(a.tasks(), b.tasks());
        assert_eq!(a.private_task(), b.private_task());
    }

    #[test]
    fn zero_tasks_zero_noise_gives_zero_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = random_instance(8, 2, 4, 0.0, 0.0, &mut rng).unwrap();
        let ds = inst.sample_public(40, &mut rng);
        assert_eq!(ds.n(), 40);
        assert!(ds.labels().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn passthrough_coordinate_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let basis = identity_basis(5, 2);
        let tasks = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let inst =
            RegressionInstance::new(basis, tasks, 0.0, DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let ds = inst.sample_public(10, &mut rng);
        for i in 0..10 {
            assert_eq!(ds.labels()[i], ds.inputs()[(i, 0)]);
        }
        let priv_ds = inst.sample_private(10, &mut rng);
        for i in 0..10 {
            assert_eq!(priv_ds.labels()[i], priv_ds.inputs()[(i, 0)]);
            assert_eq!(priv_ds.task_index()[i], 2);
        }
    }

    #[test]
    fn public_sampling_drops_remainder_and_cycles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = random_instance(4, 2, 3, 1.0, 1.0, &mut rng).unwrap();
        let ds = inst.sample_public(10, &mut rng);
        assert_eq!(ds.n(), 9);
        assert_eq!(ds.task_index(), &[1, 2, 3, 1, 2, 3, 1, 2, 3]);
    }

    #[test]
    fn excess_risk_trivial_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inst = random_instance(25, 5, 10, 1.0, 1.0, &mut rng).unwrap();
        let theta = inst.private_parameter();
        assert_eq!(inst.population_excess_risk(&theta).unwrap(), 0.0);
        let mut off = theta.clone();
        off[0] += 1.0;
        assert!((inst.population_excess_risk(&off).unwrap() - 0.5).abs() < 1e-12);
        let wrong = DVector::<f64>::zeros(7);
        assert!(matches!(
            inst.population_excess_risk(&wrong),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn diversity_isotropic_tasks() {
        let basis = identity_basis(4, 2);
        let tasks = DMatrix::<f64>::identity(2, 2);
        let inst =
            RegressionInstance::new(basis, tasks, 1.0, DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let s = inst.diversity_stats();
        assert!((s.nu - 0.5).abs() < 1e-12);
        assert!((s.kappa_bar - 1.0).abs() < 1e-12);
        assert!((s.kappa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diversity_zero_row_shrinks_nu() {
        let basis = identity_basis(4, 2);
        let tasks = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let inst =
            RegressionInstance::new(basis, tasks, 1.0, DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let s = inst.diversity_stats();
        assert!((s.nu - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn residual_noise_variance_trivial_cases() {
        let basis = identity_basis(4, 1);
        let tasks = DMatrix::from_row_slice(1, 1, &[1.0]);
        let inst =
            RegressionInstance::new(basis.clone(), tasks, 1.0, DVector::from_vec(vec![1.0]))
                .unwrap();
        // Same span: exactly sigma^2.
        assert_eq!(inst.residual_noise_variance(&basis).unwrap(), 1.0);
        // Orthogonal span: sigma^2 + |theta|^2 = 2.
        let e2 = OrthonormalBasis::from_columns(DMatrix::from_column_slice(
            4,
            1,
            &[0.0, 1.0, 0.0, 0.0],
        ))
        .unwrap();
        assert_eq!(inst.residual_noise_variance(&e2).unwrap(), 2.0);
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inst = random_instance(6, 2, 3, 1.0, 1.0, &mut rng).unwrap();
        let ds = inst.sample_public(12, &mut rng);
        let mut buf = Vec::new();
        ds.to_csv(&mut buf).unwrap();
        let back = LabeledDataset::from_csv(buf.as_slice()).unwrap();
        assert_eq!(&back, &ds);
        let header = String::from_utf8(buf).unwrap();
        assert!(header.starts_with("task_index,y,x_1,x_2,x_3,x_4,x_5,x_6\n"));
    }

    #[test]
    fn csv_rejects_garbage() {
        let text = "task_index,y,x_1\n1,not_a_number,0.5\n";
        assert!(matches!(
            LabeledDataset::from_csv(text.as_bytes()),
            Err(Error::MalformedCsv(_))
        ));
        let empty = "task_index,y,x_1\n";
        assert!(matches!(
            LabeledDataset::from_csv(empty.as_bytes()),
            Err(Error::EmptyData(_))
        ));
    }

    #[test]
    fn dataset_invariants_enforced() {
        let inputs = DMatrix::<f64>::zeros(3, 2);
        let labels = DVector::<f64>::zeros(2);
        assert!(matches!(
            LabeledDataset::new(inputs, labels, vec![1, 1]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn axis_alignment_preserves_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = random_instance(12, 4, 6, 1.0, 1.0, &mut rng).unwrap();
        let aligned = inst.with_private_task_on_first_axis().unwrap();
        // Same subspace, same d-dimensional private parameter.
        assert!(principal_angle_sin(inst.basis(), aligned.basis()).unwrap() <= 1e-10);
        assert!((aligned.private_parameter() - inst.private_parameter()).norm() <= 1e-10);
        // Private task now sits on the first coordinate axis.
        let a = aligned.private_task();
        assert!((a[0] - inst.private_task().norm()).abs() <= 1e-10);
        for j in 1..4 {
            assert!(a[j].abs() <= 1e-10);
        }
        // Public task parameters are unchanged in ambient space.
        let before = inst.tasks() * inst.basis().columns().transpose();
        let after = aligned.tasks() * aligned.basis().columns().transpose();
        assert!((before - after).norm() <= 1e-9);
    }
}
