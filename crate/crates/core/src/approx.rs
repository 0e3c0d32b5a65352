//! Series approximations of VoI in the high- and low-SNR regimes.
//!
//! Each approximation truncates the expansion of `det(A_mm)/(γ det A)` and
//! substitutes it into the exact expression. Results carry the validity
//! threshold on γ derived from where the truncated expression turns over,
//! so callers can see when the series is being pushed outside its range.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Result, VoiError};
use crate::gauss_markov::OuParams;
use crate::voi_exact::{markov_voi, snr_ratio, SnrRatio, VoiValue};
use crate::window::NoiseModel;

/// An approximate VoI with its validity flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub value: VoiValue,
    pub in_valid_region: bool,
    /// γ threshold of the validity region (lower bound for the high-SNR
    /// forms, upper bound for the low-SNR form).
    pub region_bound: f64,
}

/// `−½ln(1 − E(1 − s))` for an approximate determinant ratio `s`.
fn voi_from_ratio(kappa: f64, lag: f64, s: f64) -> Result<VoiValue> {
    let e = (-2.0 * kappa * lag).exp();
    let arg = -e * (1.0 - s);
    if !(arg > -1.0) {
        return Err(VoiError::ApproximationBreakdown { argument: 1.0 + arg });
    }
    VoiValue::new((-0.5 * arg.ln_1p()).max(0.0))
}

/// `1 − ρ²` with `ρ = e^{−κΔt}`.
fn one_minus_rho2(kappa: f64, dt: f64) -> f64 {
    -(-2.0 * kappa * dt).exp_m1()
}

/// High-SNR VoI for uniform sampling, truncated at `γ⁻²`.
///
/// Independent of the window length for `m ≥ 2`. A single-sample window
/// has the second-order coefficient 1 instead of `1/(1−ρ²)`; use
/// [`crate::voi_exact::voi_single_obs`] there.
pub fn voi_high_snr_uniform(p: &OuParams, noise: NoiseModel, dt: f64, lag: f64) -> Result<ApproxResult> {
    require_positive("dt", dt)?;
    require_positive("lag", lag)?;
    let omr = one_minus_rho2(p.kappa(), dt);
    let region_bound = 2.0 / omr;
    match snr_ratio(p, noise) {
        SnrRatio::Noiseless => Ok(ApproxResult {
            value: markov_voi(p, lag)?,
            in_valid_region: true,
            region_bound,
        }),
        SnrRatio::Finite(gamma) => {
            let s = 1.0 / gamma - 1.0 / (omr * gamma * gamma);
            Ok(ApproxResult {
                value: voi_from_ratio(p.kappa(), lag, s)?,
                in_valid_region: gamma >= region_bound,
                region_bound,
            })
        }
    }
}

/// First- and second-order coefficients of the low-SNR ratio expansion
/// `1 − c₁γ + c₂γ²`.
pub fn low_snr_coefficients(rho: f64, m: usize) -> (f64, f64) {
    let rho2 = rho * rho;
    let omr = 1.0 - rho2;
    let rho2m = rho2.powi(m as i32);
    let c1 = (1.0 - rho2m) / omr;
    let c2 = (1.0 - rho2m) * (1.0 + rho2) / (omr * omr) - 2.0 * m as f64 * rho2m / omr;
    (c1, c2)
}

/// Upper γ bound of the low-SNR region: the turning point `c₁/(2c₂)` of
/// the truncated expression.
pub fn low_snr_region_bound(rho: f64, m: usize) -> f64 {
    let rho2 = rho * rho;
    let rho2m = rho2.powi(m as i32);
    (1.0 - rho2) * (1.0 - rho2m)
        / (2.0 * (1.0 - rho2m) * (1.0 + rho2) - 4.0 * m as f64 * rho2m * (1.0 - rho2))
}

/// The same bound with `ρ²` in place of `ρ^{2m}` in the last denominator
/// term, as it is commonly quoted. It is not the turning point of the
/// truncated series and can go negative (see tests).
pub fn low_snr_region_bound_quoted(rho: f64, m: usize) -> f64 {
    let rho2 = rho * rho;
    let rho2m = rho2.powi(m as i32);
    (1.0 - rho2) * (1.0 - rho2m)
        / (2.0 * (1.0 - rho2m) * (1.0 + rho2) - 4.0 * m as f64 * rho2 * (1.0 - rho2))
}

/// Low-SNR VoI for uniform sampling, truncated at `γ²`.
pub fn voi_low_snr_uniform(
    p: &OuParams,
    noise: NoiseModel,
    dt: f64,
    m: usize,
    lag: f64,
) -> Result<ApproxResult> {
    require_positive("dt", dt)?;
    require_positive("lag", lag)?;
    if m == 0 {
        return Err(VoiError::Degenerate("window size m must be at least 1"));
    }
    let gamma = snr_ratio(p, noise).finite().ok_or(VoiError::InvalidParameter {
        name: "noise_var",
        value: 0.0,
        reason: "low-SNR expansion needs noise_var > 0",
    })?;
    let rho = (-p.kappa() * dt).exp();
    let (c1, c2) = low_snr_coefficients(rho, m);
    let s = 1.0 - c1 * gamma + c2 * gamma * gamma;
    let region_bound = low_snr_region_bound(rho, m);
    Ok(ApproxResult {
        value: voi_from_ratio(p.kappa(), lag, s)?,
        in_valid_region: gamma <= region_bound,
        region_bound,
    })
}

/// High-SNR VoI for randomly spaced samples; only the latest interval
/// `t_n − t_{n−1}` enters.
pub fn voi_high_snr_poisson(
    p: &OuParams,
    noise: NoiseModel,
    last_interval: f64,
    lag: f64,
) -> Result<ApproxResult> {
    require_positive("last_interval", last_interval)?;
    require_positive("lag", lag)?;
    let r_n = 1.0 / one_minus_rho2(p.kappa(), last_interval);
    let region_bound = 2.0 * r_n;
    match snr_ratio(p, noise) {
        SnrRatio::Noiseless => Ok(ApproxResult {
            value: markov_voi(p, lag)?,
            in_valid_region: true,
            region_bound,
        }),
        SnrRatio::Finite(gamma) => {
            let s = 1.0 / gamma - r_n / (gamma * gamma);
            Ok(ApproxResult {
                value: voi_from_ratio(p.kappa(), lag, s)?,
                in_valid_region: gamma >= region_bound,
                region_bound,
            })
        }
    }
}

/// Noise variance at which the uniform high-SNR approximation turns over:
/// `σ²(1−ρ²)/(4κ)`.
pub fn high_snr_turning_noise_var(p: &OuParams, interval: f64) -> f64 {
    p.sigma() * p.sigma() * one_minus_rho2(p.kappa(), interval) / (4.0 * p.kappa())
}

/// Mean of [`high_snr_turning_noise_var`] over an `Exp(rate)` interval:
/// `σ²/(2(λ + 2κ))`.
pub fn expected_poisson_turning_noise_var(p: &OuParams, rate: f64) -> f64 {
    p.sigma() * p.sigma() / (2.0 * (rate + 2.0 * p.kappa()))
}
