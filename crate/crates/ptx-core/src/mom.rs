//! Method-of-moments estimation of the shared subspace from pooled public data.
//!
//! The estimator is the top-k eigenspace of the label-weighted second moment
//! M = (1/n) sum_i y_i^2 x_i x_i^T. For isotropic Gaussian covariates the
//! population version is E[y^2 x x^T] = (|theta|^2 + sigma^2) I + 2 theta
//! theta^T per task, so averaging over diverse tasks gives c I + 2 B (A^T A/t)
//! B^T. The isotropic component shifts every eigenvalue equally and leaves
//! eigenvectors alone, which is why no explicit centering term is needed: the
//! top-k eigenvectors already span the task subspace whenever A^T A/t has full
//! rank.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen_descending, OrthonormalBasis};
use crate::model::LabeledDataset;

/// Rows per accumulation shard. Shards are summed sequentially in index order
/// with Kahan compensation, so the estimate is identical (to the bit) whatever
/// the rayon thread count.
const SHARD_ROWS: usize = 1024;

/// Outcome of subspace estimation: the basis plus the full moment spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct MomReport {
    #[serde(skip)]
    pub basis: OrthonormalBasis,
    /// All d eigenvalues of the moment matrix, descending.
    pub moment_eigenvalues: Vec<f64>,
    /// Gap between the k-th and (k+1)-th eigenvalue; infinite when k = d.
    pub spectral_gap: f64,
}

impl MomReport {
    /// JSON export: `{ "k", "eigenvalues", "spectral_gap", "basis" }` with the
    /// basis as d rows of k entries each.
    pub fn to_json(&self) -> serde_json::Value {
        let cols = self.basis.columns();
        let rows: Vec<Vec<f64>> = (0..cols.nrows())
            .map(|i| (0..cols.ncols()).map(|j| cols[(i, j)]).collect())
            .collect();
        serde_json::json!({
            "k": self.basis.dim_sub(),
            "eigenvalues": self.moment_eigenvalues,
            "spectral_gap": self.spectral_gap,
            "basis": rows,
        })
    }
}

/// Estimates the shared subspace from public data as the top-k eigenspace of
/// the label-weighted second moment.
///
/// A spectral gap below 1e-12 logs a degenerate-spectrum warning (the basis is
/// still returned; which eigenvectors fill the tail is then arbitrary).
pub fn estimate_subspace_mom(public: &LabeledDataset, k: usize) -> Result<MomReport> {
    let n = public.n();
    let d = public.dim();
    if n == 0 {
        return Err(Error::EmptyData("subspace estimation needs data".into()));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidK(format!("need 1 <= k <= d = {d}, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidK(format!(
            "need at least k = {k} rows, got {n}"
        )));
    }

    let moment = weighted_second_moment(public);
    let eig = symmetric_eigen_descending(&moment)?;
    let spectral_gap = if k == d {
        f64::INFINITY
    } else {
        eig.eigenvalues[k - 1] - eig.eigenvalues[k]
    };
    if spectral_gap < 1e-12 {
        log::warn!(
            "estimate_subspace_mom: degenerate spectrum (gap {spectral_gap:.3e} at k = {k}); \
             the estimated subspace is not well determined"
        );
    }
    Ok(MomReport {
        basis: eig.top_k(k)?,
        moment_eigenvalues: eig.eigenvalues,
        spectral_gap,
    })
}

/// (1/n) sum y_i^2 x_i x_i^T, sharded across threads with a fixed reduction
/// order.
fn weighted_second_moment(data: &LabeledDataset) -> DMatrix<f64> {
    let n = data.n();
    let d = data.dim();
    let n_shards = n.div_ceil(SHARD_ROWS);
    let shards: Vec<DMatrix<f64>> = (0..n_shards)
        .into_par_iter()
        .map(|s| {
            let lo = s * SHARD_ROWS;
            let hi = ((s + 1) * SHARD_ROWS).min(n);
            let mut acc = DMatrix::<f64>::zeros(d, d);
            for i in lo..hi {
                let x = data.inputs().row(i).transpose();
                let y = data.labels()[i];
                acc.ger(y * y, &x, &x, 1.0);
            }
            acc
        })
        .collect();

    // Kahan-compensated sequential reduction in shard order.
    let mut sum = DMatrix::<f64>::zeros(d, d);
    let mut comp = DMatrix::<f64>::zeros(d, d);
    for shard in &shards {
        for idx in 0..d * d {
            let y = shard[idx] - comp[idx];
            let t = sum[idx] + y;
            comp[idx] = (t - sum[idx]) - y;
            sum[idx] = t;
        }
    }
    sum / n as f64
}

/// Public-sample requirement ceil(d k^2 / gamma^2) for a target subspace
/// accuracy gamma.
pub fn required_public_samples(d: usize, k: usize, gamma: f64) -> Result<u64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    if d == 0 || k == 0 || k > d {
        return Err(Error::InvalidDims(format!(
            "need 1 <= k <= d, got d={d}, k={k}"
        )));
    }
    Ok(((d * k * k) as f64 / (gamma * gamma)).ceil() as u64)
}
