//! The two-phase transfer pipeline, end to end.
//!
//! Phase one estimates the shared subspace from public multi-task data (or
//! accepts an injected oracle basis). Phase two projects the private sample
//! into that subspace, runs the private regression in k dimensions, and lifts
//! the solution back to the ambient space. The privacy guarantee covers the
//! private dataset only: the subspace is resolved by [`resolve_subspace`],
//! whose signature cannot see private rows, before the private data is
//! touched.
//!
//! The lifted estimate is the canonical output. Parameter error against a
//! known instance is `||lifted - B alpha||` and excess risk is half its
//! square, matching the population risk of the linear model.

use nalgebra::DVector;
use rand::Rng;

use crate::accountant::PrivacyBudget;
use crate::dpsgd::{dpsgd_fit, DpSgdConfig, PrivacySpent};
use crate::error::{Error, Result};
use crate::linalg::{principal_angle_sin, OrthonormalBasis};
use crate::model::{LabeledDataset, RegressionInstance};
use crate::mom::estimate_subspace_mom;

/// Where phase one gets its basis from.
///
/// The oracle arm is first-class, not test-only: the lower-bound experiments
/// and the exact-gamma sweeps inject a basis here and then share the private
/// phase with the production path.
#[derive(Debug, Clone)]
pub enum SubspaceSource<'a> {
    /// Estimate the basis from public rows by the method of moments.
    PublicMom(&'a LabeledDataset),
    /// Use this basis as-is (true basis, or a deliberately perturbed one).
    Oracle(OrthonormalBasis),
}

/// Output of one two-phase run.
#[derive(Debug, Clone)]
pub struct TwoPhaseResult {
    /// Phase-one basis, estimated or injected.
    pub subspace: OrthonormalBasis,
    /// Private-phase solution in subspace coordinates.
    pub alpha_hat: DVector<f64>,
    /// `subspace.columns * alpha_hat`, the ambient-space estimate.
    pub lifted: DVector<f64>,
    /// Principal angle against the true basis; present only when ground truth
    /// was supplied.
    pub sin_theta: Option<f64>,
    /// Population excess risk of `lifted`; present only with ground truth.
    pub excess_risk: Option<f64>,
    pub privacy_spent: PrivacySpent,
}

impl TwoPhaseResult {
    pub fn to_json(&self) -> serde_json::Value {
        let d = self.subspace.dim_ambient();
        let k = self.subspace.dim_sub();
        let basis_rows: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..k).map(|j| self.subspace.columns()[(i, j)]).collect())
            .collect();
        serde_json::json!({
            "k": k,
            "alpha_hat": self.alpha_hat.iter().copied().collect::<Vec<f64>>(),
            "lifted": self.lifted.iter().copied().collect::<Vec<f64>>(),
            "sin_theta": self.sin_theta,
            "excess_risk": self.excess_risk,
            "privacy_spent": self.privacy_spent,
            "subspace": basis_rows,
        })
    }
}

/// Phase one in isolation. Takes only the public source, so the type system
/// already rules out private rows influencing the basis.
pub fn resolve_subspace(source: &SubspaceSource, k: usize) -> Result<OrthonormalBasis> {
    match source {
        SubspaceSource::PublicMom(public) => Ok(estimate_subspace_mom(public, k)?.basis),
        SubspaceSource::Oracle(basis) => {
            if basis.dim_sub() != k {
                return Err(Error::DimensionMismatch(format!(
                    "oracle basis spans {} dimensions, expected k={k}",
                    basis.dim_sub()
                )));
            }
            Ok(basis.clone())
        }
    }
}

/// Replaces every input row x with its subspace coordinates x^T Q. Labels and
/// task indices pass through unchanged.
pub fn project_dataset(data: &LabeledDataset, basis: &OrthonormalBasis) -> Result<LabeledDataset> {
    if data.dim() != basis.dim_ambient() {
        return Err(Error::DimensionMismatch(format!(
            "data dimension {} vs basis ambient dimension {}",
            data.dim(),
            basis.dim_ambient()
        )));
    }
    let projected = data.inputs() * basis.columns();
    LabeledDataset::new(projected, data.labels().clone(), data.task_index().to_vec())
}

/// Runs the full pipeline: resolve the basis, project the private sample, fit
/// privately in k dimensions, lift back. Metrics are filled when `truth` is
/// supplied.
pub fn two_phase_transfer<R: Rng + ?Sized>(
    source: &SubspaceSource,
    private: &LabeledDataset,
    k: usize,
    dp_cfg: &DpSgdConfig,
    target: Option<&PrivacyBudget>,
    truth: Option<&RegressionInstance>,
    rng: &mut R,
) -> Result<TwoPhaseResult> {
    if private.n() == 0 {
        return Err(Error::EmptyPrivate);
    }
    // Phase one sees only `source`; `private` first enters the pipeline below.
    let subspace = resolve_subspace(source, k)?;
    let projected = project_dataset(private, &subspace)?;
    let fit = dpsgd_fit(&projected, dp_cfg, target, rng)?;
    let alpha_hat = fit.weights;
    let lifted = subspace.lift(&alpha_hat)?;
    debug_assert!(
        (&lifted - subspace.columns() * &alpha_hat).norm() <= 1e-12,
        "lift must be the exact basis-times-coordinates product"
    );
    let (sin_theta, excess_risk) = match truth {
        Some(inst) => {
            let angle = principal_angle_sin(inst.basis(), &subspace)?;
            let risk = inst.population_excess_risk(&lifted)?;
            (Some(angle), Some(risk))
        }
        None => (None, None),
    };
    Ok(TwoPhaseResult {
        subspace,
        alpha_hat,
        lifted,
        sin_theta,
        excess_risk,
        privacy_spent: fit.privacy_spent,
    })
}

/// Squared distance between the true parameter and its projection onto the
/// estimated subspace: the bias no amount of private data can remove. Always
/// at most sin^2(theta) times the squared parameter norm.
pub fn projection_bias(basis: &OrthonormalBasis, inst: &RegressionInstance) -> Result<f64> {
    let theta = inst.private_parameter();
    if theta.len() != basis.dim_ambient() {
        return Err(Error::DimensionMismatch(format!(
            "parameter dimension {} vs basis ambient dimension {}",
            theta.len(),
            basis.dim_ambient()
        )));
    }
    Ok(basis.residual(&theta)?.norm_squared())
}
