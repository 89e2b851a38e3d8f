//! Fingerprinting attack against subspace regression mechanisms.
//!
//! The attack operates entirely in the k-dimensional projected model: inputs
//! are standard normal k-vectors and labels follow y = x^T alpha + noise with
//! effective noise variance sigma^2 + 1 - rho^2 (the ambient residual folded
//! into the label noise when the true parameter has unit norm and its
//! projection has norm rho).
//!
//! A score for a candidate sample (x, y) against a mechanism output M and the
//! true in-subspace parameter alpha is
//!
//! ```text
//! A = (y - x^T alpha) * sum_{j=1}^{k-1} (M_j - alpha_j) * x_j
//! ```
//!
//! The sum deliberately stops at k-1: the prior below fixes the last
//! coordinate to normalize the vector, so it carries no independent signal.
//! Out-of-sample scores have mean zero; in-sample scores of an accurate
//! mechanism are positive on average, and the per-trial sum concentrates
//! near effective_noise_var * (k-1) for least squares. Differential privacy
//! caps how far the in-sample mean can sit above the out-of-sample mean,
//! which is what [`membership_experiment`] measures.
//!
//! Prior normalization: the first k-1 coordinates are drawn from a centered
//! Gaussian with variance rho^2/(k-1), truncated at +/- rho/sqrt(k-1) by
//! rejection; the last coordinate is +/- sqrt(rho^2 - sum of squares) with a
//! random sign, so the norm is exactly rho. (Completing to norm 1 instead
//! would contradict the parameter class, whose vectors all have norm rho;
//! norm rho is the consistent choice.)

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::accountant::PrivacyBudget;
use crate::dpsgd::{dpsgd_fit, ols_fit, DpSgdConfig};
use crate::error::{Error, Result};
use crate::linalg::OrthonormalBasis;
use crate::model::LabeledDataset;
use crate::seed::derive_seed;

/// Fixed context for a membership experiment: the (estimated) basis, the
/// in-subspace truth, and the label-noise level of the projected model.
#[derive(Debug, Clone)]
pub struct AttackInstance {
    basis: OrthonormalBasis,
    alpha_hat_true: DVector<f64>,
    rho: f64,
    sigma: f64,
    effective_noise_var: f64,
}

impl AttackInstance {
    /// `alpha_hat_true` is the projection of the true parameter onto the
    /// basis; its norm defines rho, which must lie in (0, 1] (the ambient
    /// parameter has unit norm, so no projection can be longer).
    pub fn new(
        basis: OrthonormalBasis,
        alpha_hat_true: DVector<f64>,
        sigma: f64,
    ) -> Result<Self> {
        let k = basis.dim_sub();
        if k < 2 {
            return Err(Error::KTooSmall(k));
        }
        if alpha_hat_true.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "alpha has length {}, basis spans {k} dimensions",
                alpha_hat_true.len()
            )));
        }
        let rho = alpha_hat_true.norm();
        if !(rho > 0.0 && rho <= 1.0 + 1e-12) {
            return Err(Error::InvalidRho(rho));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgs(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        let rho = rho.min(1.0);
        Ok(Self {
            basis,
            alpha_hat_true,
            rho,
            sigma,
            effective_noise_var: sigma * sigma + 1.0 - rho * rho,
        })
    }

    /// Random basis plus a prior draw for the in-subspace truth.
    pub fn synthetic<R: Rng + ?Sized>(
        d: usize,
        k: usize,
        rho: f64,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let basis = crate::linalg::random_orthonormal(d, k, rng)?;
        let alpha = sample_prior(k, rho, rng)?;
        Self::new(basis, alpha, sigma)
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn alpha_hat_true(&self) -> &DVector<f64> {
        &self.alpha_hat_true
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn effective_noise_var(&self) -> f64 {
        self.effective_noise_var
    }

    /// Draws `n` samples of the projected model under parameter `alpha`:
    /// x standard normal in k dimensions, y = x^T alpha + effective noise.
    pub fn sample_trial_data<R: Rng + ?Sized>(
        &self,
        alpha: &DVector<f64>,
        n: usize,
        rng: &mut R,
    ) -> Result<LabeledDataset> {
        let k = self.basis.dim_sub();
        if alpha.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "alpha has length {}, expected {k}",
                alpha.len()
            )));
        }
        let noise_std = self.effective_noise_var.sqrt();
        let mut inputs = nalgebra::DMatrix::zeros(n, k);
        let mut labels = DVector::zeros(n);
        for i in 0..n {
            let mut dot = 0.0;
            for j in 0..k {
                let v: f64 = rng.sample(StandardNormal);
                inputs[(i, j)] = v;
                dot += v * alpha[j];
            }
            let z: f64 = rng.sample(StandardNormal);
            labels[i] = dot + noise_std * z;
        }
        LabeledDataset::new(inputs, labels, vec![1; n])
    }
}

/// The fingerprinting score of one sample against one mechanism output.
/// The correlation sum runs over the first k-1 coordinates only.
pub fn attack_score(
    x_b: &DVector<f64>,
    y: f64,
    mechanism_output: &DVector<f64>,
    alpha_hat: &DVector<f64>,
) -> Result<f64> {
    let k = alpha_hat.len();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    if x_b.len() != k || mechanism_output.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "score expects k={k} throughout, got x={}, output={}",
            x_b.len(),
            mechanism_output.len()
        )));
    }
    let residual = y - x_b.dot(alpha_hat);
    let mut corr = 0.0;
    for j in 0..k - 1 {
        corr += (mechanism_output[j] - alpha_hat[j]) * x_b[j];
    }
    Ok(residual * corr)
}

/// Draws a parameter of norm exactly `rho`: k-1 truncated-Gaussian
/// coordinates, last coordinate completing the norm with a random sign.
pub fn sample_prior<R: Rng + ?Sized>(k: usize, rho: f64, rng: &mut R) -> Result<DVector<f64>> {
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidRho(rho));
    }
    let s = rho / ((k - 1) as f64).sqrt();
    let mut out = DVector::zeros(k);
    let mut sumsq = 0.0;
    for j in 0..k - 1 {
        // Rejection sampling keeps the truncation exact (acceptance ~68%).
        let v = loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= 1.0 {
                break s * z;
            }
        };
        out[j] = v;
        sumsq += v * v;
    }
    let last = (rho * rho - sumsq).max(0.0).sqrt();
    out[k - 1] = if rng.random::<bool>() { last } else { -last };
    Ok(out)
}

/// The estimator under attack.
#[derive(Debug, Clone)]
pub enum AttackMechanism {
    /// Releases the true parameter; the output carries nothing about the
    /// sample, so in- and out-scores are identically zero.
    Oracle,
    /// Nonprivate least squares.
    Ols,
    /// DP-SGD with the noise multiplier fixed in the config. Calibrate once
    /// via [`dpsgd_mechanism_for_budget`]; the per-trial loop never touches
    /// the accountant.
    DpSgd(DpSgdConfig),
}

/// Resolves a privacy budget into a concrete DP-SGD mechanism for datasets of
/// size `n2`, mirroring the schedule arithmetic of the fit itself.
pub fn dpsgd_mechanism_for_budget(
    mut cfg: DpSgdConfig,
    target: &PrivacyBudget,
    n2: usize,
) -> Result<AttackMechanism> {
    if cfg.batch_size == 0 || cfg.batch_size > n2 {
        return Err(Error::InvalidArgs(format!(
            "batch_size {} incompatible with n2={n2}",
            cfg.batch_size
        )));
    }
    let steps_per_epoch = n2 / cfg.batch_size;
    let steps = steps_per_epoch as u64 * u64::from(cfg.epochs);
    let q = cfg.batch_size as f64 / n2 as f64;
    cfg.noise_multiplier = crate::accountant::calibrate_noise(target, steps, q)?;
    Ok(AttackMechanism::DpSgd(cfg))
}

/// Aggregates of a membership experiment. Means and standard errors are
/// computed over per-trial averages, which is the honest scale: scores inside
/// one trial share a mechanism output and are correlated.
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub mean_in: f64,
    pub mean_out: f64,
    pub se_in: f64,
    pub se_out: f64,
    pub n_trials: usize,
    /// Mean over trials of the per-trial sum of in-sample scores, the
    /// estimate of sum_i E[A_i].
    pub sum_in_scores: f64,
    /// Mean over trials of the per-trial mean absolute out-of-sample score.
    pub mean_abs_out: f64,
}

struct TrialStats {
    mean_in: f64,
    mean_out: f64,
    sum_in: f64,
    mean_abs_out: f64,
}

fn run_trial(
    inst: &AttackInstance,
    mechanism: &AttackMechanism,
    n2: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrialStats> {
    let k = inst.basis.dim_sub();
    let alpha = sample_prior(k, inst.rho, rng)?;
    let data = inst.sample_trial_data(&alpha, n2, rng)?;
    let output = match mechanism {
        AttackMechanism::Oracle => alpha.clone(),
        AttackMechanism::Ols => ols_fit(&data)?.weights,
        AttackMechanism::DpSgd(cfg) => dpsgd_fit(&data, cfg, None, rng)?.weights,
    };
    let mut sum_in = 0.0;
    for i in 0..n2 {
        let x = data.inputs().row(i).transpose();
        sum_in += attack_score(&x, data.labels()[i], &output, &alpha)?;
    }
    let fresh = inst.sample_trial_data(&alpha, n2, rng)?;
    let mut sum_out = 0.0;
    let mut sum_abs_out = 0.0;
    for i in 0..n2 {
        let x = fresh.inputs().row(i).transpose();
        let a = attack_score(&x, fresh.labels()[i], &output, &alpha)?;
        sum_out += a;
        sum_abs_out += a.abs();
    }
    let nf = n2 as f64;
    Ok(TrialStats {
        mean_in: sum_in / nf,
        mean_out: sum_out / nf,
        sum_in,
        mean_abs_out: sum_abs_out / nf,
    })
}

/// Kahan-compensated sum; the reduction result does not depend on how trials
/// were scheduled because inputs arrive in trial order.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var.max(0.0) / n).sqrt())
}

/// Runs `n_trials` independent membership trials: redraw the parameter from
/// the prior, sample a private set, fit the mechanism, then score the in-set
/// points and an equal number of fresh points against the same output.
///
/// Trials run in parallel on independent ChaCha streams derived from one
/// draw of `rng`, so results are reproducible regardless of thread count.
pub fn membership_experiment<R: Rng + ?Sized>(
    inst: &AttackInstance,
    mechanism: &AttackMechanism,
    n2: usize,
    n_trials: usize,
    rng: &mut R,
) -> Result<MembershipReport> {
    if n_trials == 0 {
        return Err(Error::InvalidArgs("n_trials must be positive".into()));
    }
    if n2 == 0 {
        return Err(Error::EmptyPrivate);
    }
    if n_trials < 30 {
        log::warn!("membership_experiment with {n_trials} trials: standard errors will be noisy");
    }
    let base = rng.random::<u64>();
    let stats: Vec<TrialStats> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut trial_rng = ChaCha8Rng::seed_from_u64(derive_seed(base, &[trial as u64]));
            run_trial(inst, mechanism, n2, &mut trial_rng)
        })
        .collect::<Result<_>>()?;
    let in_means: Vec<f64> = stats.iter().map(|s| s.mean_in).collect();
    let out_means: Vec<f64> = stats.iter().map(|s| s.mean_out).collect();
    let (mean_in, se_in) = mean_and_se(&in_means);
    let (mean_out, se_out) = mean_and_se(&out_means);
    let sum_in_scores =
        compensated_sum(stats.iter().map(|s| s.sum_in)) / n_trials as f64;
    let mean_abs_out =
        compensated_sum(stats.iter().map(|s| s.mean_abs_out)) / n_trials as f64;
    Ok(MembershipReport {
        mean_in,
        mean_out,
        se_in,
        se_out,
        n_trials,
        sum_in_scores,
        mean_abs_out,
    })
}
