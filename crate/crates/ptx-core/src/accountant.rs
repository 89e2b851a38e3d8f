//! Renyi-DP accounting for the subsampled Gaussian mechanism, conversion to
//! (epsilon, delta), and noise calibration.
//!
//! Accounting model: T identical steps, each releasing the mean of clipped
//! per-example gradients from a batch sampled at rate q, plus Gaussian noise
//! with standard deviation noise_multiplier x clip_norm (before averaging).
//! Neighboring datasets differ by replacing one record (row-level privacy);
//! add/remove accounting differs by constants and is not what this module
//! computes.
//!
//! Per-order math, for one step with noise multiplier s:
//!
//! - q = 1 (no subsampling): rdp(a) = a / (2 s^2), exact for every real a > 1.
//! - q < 1, integer a: the exact binomial expansion
//!   rdp(a) = (1/(a-1)) * log( sum_{j=0}^{a} C(a,j) (1-q)^{a-j} q^j e^{j(j-1)/(2 s^2)} ),
//!   accumulated in the log domain for stability.
//! - q < 1, fractional a: Renyi divergence is nondecreasing in the order, so
//!   rdp(a) <= rdp(ceil(a)); the ceiling value is used as a safe upper bound.
//!
//! Composition over T steps is linear. The conversion to (epsilon, delta) is
//! epsilon = min over orders of rdp(a) + log(1/delta)/(a - 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// What a DP-SGD run looks like to the accountant: T steps at sampling rate q
/// with noise multiplier sigma. All fields validated at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismSchedule {
    steps: u64,
    sampling_rate: f64,
    noise_multiplier: f64,
}

impl MechanismSchedule {
    pub fn new(steps: u64, sampling_rate: f64, noise_multiplier: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgs(
                "schedule needs at least one step; a zero-step mechanism releases nothing".into(),
            ));
        }
        if !(sampling_rate > 0.0 && sampling_rate <= 1.0) {
            return Err(Error::InvalidArgs(format!(
                "sampling rate must be in (0, 1], got {sampling_rate}"
            )));
        }
        if !(noise_multiplier > 0.0) {
            return Err(Error::InvalidArgs(format!(
                "noise multiplier must be positive, got {noise_multiplier}"
            )));
        }
        Ok(Self {
            steps,
            sampling_rate,
            noise_multiplier,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn noise_multiplier(&self) -> f64 {
        self.noise_multiplier
    }
}

/// A target or realized (epsilon, delta) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgs(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgs(format!(
                "delta must be in (0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }
}

/// Default order grid: {1.25, 1.5, 1.75} plus the integers 2..=256. Covers
/// epsilon from a few hundredths up to the hundreds at desk-scale delta.
pub fn default_orders() -> Vec<f64> {
    let mut orders = vec![1.25, 1.5, 1.75];
    orders.extend((2..=256).map(|a| a as f64));
    orders
}

/// RDP of the schedule at each requested order, as (order, rdp_epsilon) pairs.
pub fn rdp_curve(sched: &MechanismSchedule, orders: &[f64]) -> Result<Vec<(f64, f64)>> {
    orders
        .iter()
        .map(|&a| Ok((a, sched.steps as f64 * rdp_single_step(sched, a)?)))
        .collect()
}

fn rdp_single_step(sched: &MechanismSchedule, order: f64) -> Result<f64> {
    if !(order > 1.0) || !order.is_finite() {
        return Err(Error::InvalidOrder(order));
    }
    let s = sched.noise_multiplier;
    let q = sched.sampling_rate;
    if q >= 1.0 - tol::FULL_BATCH_Q {
        // Plain Gaussian mechanism: exact at every real order.
        return Ok(order / (2.0 * s * s));
    }
    let a_int = if order.fract() == 0.0 {
        order as u64
    } else {
        // Upper bound for fractional orders via monotonicity in the order.
        order.ceil() as u64
    };
    Ok(subsampled_gaussian_rdp_int(q, s, a_int))
}

/// Exact RDP of one subsampled Gaussian step at integer order a >= 2,
/// evaluated by the binomial log-sum.
fn subsampled_gaussian_rdp_int(q: f64, s: f64, a: u64) -> f64 {
    debug_assert!(a >= 2);
    let af = a as f64;
    let mut terms = Vec::with_capacity(a as usize + 1);
    let mut log_binom = 0.0; // log C(a, 0)
    for j in 0..=a {
        let jf = j as f64;
        if j > 0 {
            log_binom += ((af - jf + 1.0) / jf).ln();
        }
        // (1-q)^{a-j} q^j e^{j(j-1)/(2 s^2)}
        let t = log_binom
            + (af - jf) * (1.0 - q).ln()
            + jf * q.ln()
            + jf * (jf - 1.0) / (2.0 * s * s);
        terms.push(t);
    }
    log_sum_exp(&terms) / (af - 1.0)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Converts an RDP curve to epsilon at the given delta:
/// min over orders of rdp + log(1/delta)/(order - 1).
pub fn to_eps_delta(curve: &[(f64, f64)], delta: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgs(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    let log_inv_delta = (1.0 / delta).ln();
    let mut best = f64::INFINITY;
    for &(order, rdp) in curve {
        if !(order > 1.0) {
            return Err(Error::InvalidOrder(order));
        }
        let eps = rdp + log_inv_delta / (order - 1.0);
        if eps < best {
            best = eps;
        }
    }
    Ok(best)
}

/// Epsilon of a schedule at the default order grid.
pub fn epsilon_for(sched: &MechanismSchedule, delta: f64) -> Result<f64> {
    to_eps_delta(&rdp_curve(sched, &default_orders())?, delta)
}

/// Bisection bracket for noise calibration.
pub const SIGMA_MIN: f64 = 1e-4;
pub const SIGMA_MAX: f64 = 1e6;

/// Finds a noise multiplier whose accounted epsilon lands in
/// [target.epsilon - CALIBRATION_WINDOW, target.epsilon].
///
/// The returned value never exceeds the target budget when re-accounted.
/// steps = 0 is a degenerate schedule that releases nothing: the lower
/// bracket [`SIGMA_MIN`] is returned and the realized epsilon is 0.
pub fn calibrate_noise(target: &PrivacyBudget, steps: u64, sampling_rate: f64) -> Result<f64> {
    PrivacyBudget::new(target.epsilon, target.delta)?;
    if steps == 0 {
        log::info!("calibrate_noise: zero steps, returning the lower bracket");
        return Ok(SIGMA_MIN);
    }
    let eps_at = |sigma: f64| -> Result<f64> {
        let sched = MechanismSchedule::new(steps, sampling_rate, sigma)?;
        epsilon_for(&sched, target.delta)
    };
    let eps_hi_sigma = eps_at(SIGMA_MAX)?;
    if eps_hi_sigma > target.epsilon {
        return Err(Error::Unachievable(format!(
            "epsilon {} at the noise ceiling {SIGMA_MAX} still exceeds target {}",
            eps_hi_sigma, target.epsilon
        )));
    }
    let eps_lo_sigma = eps_at(SIGMA_MIN)?;
    if eps_lo_sigma < target.epsilon - tol::CALIBRATION_WINDOW {
        return Err(Error::Unachievable(format!(
            "target epsilon {} is looser than the {} reachable at the noise floor {SIGMA_MIN}",
            target.epsilon, eps_lo_sigma
        )));
    }
    if eps_lo_sigma <= target.epsilon {
        return Ok(SIGMA_MIN);
    }
    // Invariant: eps(lo) > target >= eps(hi). Bisect in log sigma; epsilon is
    // continuous and strictly decreasing in sigma, so the window is reachable.
    let mut lo = SIGMA_MIN.ln();
    let mut hi = SIGMA_MAX.ln();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let eps = eps_at(mid.exp())?;
        if eps > target.epsilon {
            lo = mid;
        } else {
            if eps >= target.epsilon - tol::CALIBRATION_WINDOW {
                return Ok(mid.exp());
            }
            hi = mid;
        }
    }
    Err(Error::Unachievable(
        "bisection failed to land in the calibration window".into(),
    ))
}
