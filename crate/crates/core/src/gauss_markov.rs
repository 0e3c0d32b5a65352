//! The latent Ornstein–Uhlenbeck process.
//!
//! `dX = κ(θ − X)dt + σ dW`, started in its stationary law. Paths are drawn
//! from the exact Gaussian transition kernel, so sampled moments carry no
//! discretization bias.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, require_nonnegative, require_positive, Result, VoiError};
use crate::rng::{self, SimRng};

/// Parameters of the OU process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    kappa: f64,
    theta: f64,
    sigma: f64,
}

/// Mean and variance of the stationary law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryMoments {
    pub mean: f64,
    pub variance: f64,
}

impl OuParams {
    pub fn new(kappa: f64, theta: f64, sigma: f64) -> Result<Self> {
        Ok(Self {
            kappa: require_positive("kappa", kappa)?,
            theta: require_finite("theta", theta)?,
            sigma: require_positive("sigma", sigma)?,
        })
    }

    /// Mean-reversion rate κ.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Long-term mean θ.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Volatility σ.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// σ²/(2κ).
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.kappa)
    }

    /// Correlation `e^{−κ|lag|}` between two samples `lag` apart.
    pub fn correlation(&self, lag: f64) -> f64 {
        (-self.kappa * lag.abs()).exp()
    }
}

pub fn stationary_moments(p: &OuParams) -> StationaryMoments {
    StationaryMoments {
        mean: p.theta,
        variance: p.stationary_variance(),
    }
}

/// Mean and variance of `X_{s+dt}` given `X_s = x_s`.
pub fn conditional_moments(p: &OuParams, x_s: f64, dt: f64) -> Result<(f64, f64)> {
    let dt = require_nonnegative("dt", dt)?;
    let decay = (-p.kappa * dt).exp();
    let mean = p.theta + (x_s - p.theta) * decay;
    let variance = -p.stationary_variance() * (-2.0 * p.kappa * dt).exp_m1();
    Ok((mean, variance))
}

/// Stationary covariance `(σ²/2κ)e^{−κ|lag|}`.
pub fn covariance(p: &OuParams, lag: f64) -> f64 {
    p.stationary_variance() * p.correlation(lag)
}

fn check_increasing(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(VoiError::Degenerate("at least one time is required"));
    }
    for (i, t) in times.iter().enumerate() {
        require_finite("times", *t)?;
        if i > 0 && !(*t > times[i - 1]) {
            return Err(VoiError::NonMonotoneTimes { index: i });
        }
    }
    Ok(())
}

/// Exact path sample at `times`, starting from the stationary law.
pub fn sample_path(p: &OuParams, times: &[f64], seed: u64) -> Result<Vec<f64>> {
    sample_path_with(p, times, &mut rng::seeded(seed))
}

/// As [`sample_path`], drawing from a caller-owned generator.
pub fn sample_path_with(p: &OuParams, times: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
    check_increasing(times)?;
    let sd = p.stationary_variance().sqrt();
    let z: f64 = rng.sample(StandardNormal);
    let x0 = p.theta + sd * z;
    let mut out = Vec::with_capacity(times.len());
    out.push(x0);
    continue_path(p, x0, times, rng, &mut out);
    Ok(out)
}

/// Continues a path from state `x0` held at `times[0]`; `times[0]` itself
/// is not resampled. Returns the states at `times[1..]`.
pub fn sample_path_from(p: &OuParams, x0: f64, times: &[f64], rng: &mut SimRng) -> Result<Vec<f64>> {
    check_increasing(times)?;
    let mut out = Vec::with_capacity(times.len().saturating_sub(1));
    continue_path(p, x0, times, rng, &mut out);
    Ok(out)
}

fn continue_path(p: &OuParams, x0: f64, times: &[f64], rng: &mut SimRng, out: &mut Vec<f64>) {
    let var = p.stationary_variance();
    let mut x = x0;
    for w in times.windows(2) {
        let dt = w[1] - w[0];
        let decay = (-p.kappa * dt).exp();
        let sd = (-var * (-2.0 * p.kappa * dt).exp_m1()).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        x = p.theta + (x - p.theta) * decay + sd * z;
        out.push(x);
    }
}
