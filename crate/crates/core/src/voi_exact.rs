//! Exact value of information.
//!
//! Two independent routes compute `I(X_t; Y_window)` in nats:
//!
//! * [`gaussian_mi_oracle`] assembles the joint covariance of the
//!   observations and the current state and factors it densely. It knows
//!   nothing about OU structure beyond the covariance kernel.
//! * [`voi_closed_form`] is the Markov term minus the correction
//!   `½ln(1 + det(A_mm)/((e^{2κ(t−t_n)}−1)·γ·det(A)))`, with
//!   `A = σ_n²Σ_X⁻¹ + I` handled by the tridiagonal recurrence.
//!
//! With `E = e^{−2κ(t−t_n)}` and `r = det(A_mm)/(γ det A)` the closed form
//! collapses to `−½ln(1 − E(1 − r))`, which is what is evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Result, VoiError};
use crate::gauss_markov::{covariance, OuParams};
use crate::linalg::DenseMatrix;
use crate::tridiag::{det_pair_recurrence, det_ratio, matrix_a, poisson_inverse_cov};
use crate::window::{NoiseModel, ObservationWindow, MIN_TIME_GAP};

/// Mutual information in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoiValue(f64);

impl VoiValue {
    pub const ZERO: VoiValue = VoiValue(0.0);

    pub fn new(nats: f64) -> Result<Self> {
        if nats.is_finite() && nats >= 0.0 {
            Ok(Self(nats))
        } else {
            Err(VoiError::InvalidParameter {
                name: "voi",
                value: nats,
                reason: "mutual information must be finite and >= 0",
            })
        }
    }

    pub fn nats(self) -> f64 {
        self.0
    }

    pub fn bits(self) -> f64 {
        self.0 / std::f64::consts::LN_2
    }
}

/// Process-to-noise variance ratio `γ = σ²/(2κσ_n²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SnrRatio {
    Finite(f64),
    /// `σ_n² = 0`: the observations are the states themselves.
    Noiseless,
}

impl SnrRatio {
    pub fn finite(self) -> Option<f64> {
        match self {
            SnrRatio::Finite(g) => Some(g),
            SnrRatio::Noiseless => None,
        }
    }
}

pub fn snr_ratio(p: &OuParams, noise: NoiseModel) -> SnrRatio {
    if noise.is_noiseless() {
        SnrRatio::Noiseless
    } else {
        SnrRatio::Finite(p.stationary_variance() / noise.variance())
    }
}

/// Joint covariance blocks of `(Y, X_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCovariance {
    pub sigma_yy: DenseMatrix,
    pub sigma_yx: Vec<f64>,
    pub var_x: f64,
}

/// `½ln(var_x·det Σ_Y / det Σ_{Y,X})` from a Cholesky factorization of the
/// joint covariance ordered `(Y, X_t)`.
///
/// If `L` is that factor, its last row is `[w, ℓ]` with `w = L_Y⁻¹σ_{YX}`,
/// so the MI equals `−½ln(1 − |w|²/var_x)`.
pub fn gaussian_mi_oracle(sigma_yy: &DenseMatrix, sigma_yx: &[f64], var_x: f64) -> Result<VoiValue> {
    let m = sigma_yy.dim();
    if sigma_yx.len() != m {
        return Err(VoiError::DimensionMismatch(format!(
            "cross-covariance has {} entries for a {m}x{m} block",
            sigma_yx.len()
        )));
    }
    let joint = DenseMatrix::from_fn(m + 1, |i, j| match (i == m, j == m) {
        (false, false) => sigma_yy[(i, j)],
        (true, true) => var_x,
        (true, false) => sigma_yx[j],
        (false, true) => sigma_yx[i],
    });
    for i in 0..=m {
        for j in 0..i {
            if (joint[(i, j)] - joint[(j, i)]).abs() > 1e-12 * (joint[(i, i)] * joint[(j, j)]).sqrt() {
                return Err(VoiError::DimensionMismatch("joint covariance is not symmetric".into()));
            }
        }
    }
    let chol = joint.cholesky()?;
    let explained: f64 = (0..m).map(|k| chol.factor(m, k).powi(2)).sum::<f64>() / var_x;
    VoiValue::new((-0.5 * (-explained).ln_1p()).max(0.0))
}

/// `Σ_Y = Σ_X + σ_n²I`, `Cov(Y_i, X_t)` and `Var X_t` for a query at `t`.
pub fn assemble_covariances(
    p: &OuParams,
    noise: NoiseModel,
    w: &ObservationWindow,
    t: f64,
) -> Result<JointCovariance> {
    check_query_time(w, t)?;
    let times = w.gen_times();
    let m = times.len();
    let mut sigma_yy = DenseMatrix::from_fn(m, |i, j| covariance(p, times[i] - times[j]));
    for i in 0..m {
        sigma_yy[(i, i)] += noise.variance();
    }
    let sigma_yx = times.iter().map(|&ti| covariance(p, t - ti)).collect();
    Ok(JointCovariance {
        sigma_yy,
        sigma_yx,
        var_x: p.stationary_variance(),
    })
}

/// Ground-truth VoI through the dense oracle.
pub fn voi_oracle(p: &OuParams, noise: NoiseModel, w: &ObservationWindow, t: f64) -> Result<VoiValue> {
    let jc = assemble_covariances(p, noise, w, t)?;
    gaussian_mi_oracle(&jc.sigma_yy, &jc.sigma_yx, jc.var_x)
}

fn check_query_time(w: &ObservationWindow, t: f64) -> Result<f64> {
    let lag = t - w.last_time();
    if !(lag > 0.0) || !t.is_finite() {
        return Err(VoiError::InvalidParameter {
            name: "t",
            value: t,
            reason: "query time must be strictly after the last generation time",
        });
    }
    Ok(lag)
}

/// `det(A_mm)/(γ det A)` for the window.
fn window_det_ratio(p: &OuParams, noise: NoiseModel, w: &ObservationWindow) -> Result<f64> {
    if w.intervals().iter().any(|&g| g < MIN_TIME_GAP) {
        return Err(VoiError::DuplicateTimestamps {
            index: 0,
            min_gap: MIN_TIME_GAP,
        });
    }
    let gamma = p.stationary_variance() / noise.variance();
    let inv = poisson_inverse_cov(p, w.intervals())?;
    let a = matrix_a(&inv, noise.variance())?;
    let r = det_ratio(&det_pair_recurrence(&a), gamma);
    if !r.is_finite() || r <= 0.0 {
        return Err(VoiError::NotPositiveDefinite { minor: w.m() });
    }
    Ok(r)
}

/// Closed-form VoI. A noiseless channel reduces to [`markov_voi`].
pub fn voi_closed_form(p: &OuParams, noise: NoiseModel, w: &ObservationWindow, t: f64) -> Result<VoiValue> {
    let lag = check_query_time(w, t)?;
    if noise.is_noiseless() {
        return markov_voi(p, lag);
    }
    let r = window_det_ratio(p, noise, w)?;
    let e = (-2.0 * p.kappa() * lag).exp();
    VoiValue::new((-0.5 * (-e * (1.0 - r)).ln_1p()).max(0.0))
}

/// `I(X_t; X_{t_n}) = ½ln(1/(1 − e^{−2κ·lag}))`.
pub fn markov_voi(p: &OuParams, lag: f64) -> Result<VoiValue> {
    require_positive("lag", lag)?;
    let x = 2.0 * p.kappa() * lag;
    // expm1 keeps precision near zero lag, ln_1p in the far tail.
    let nats = if x < std::f64::consts::LN_2 {
        -0.5 * (-(-x).exp_m1()).ln()
    } else {
        -0.5 * (-(-x).exp()).ln_1p()
    };
    VoiValue::new(nats)
}

/// Markov VoI minus hidden-Markov VoI.
pub fn correction(p: &OuParams, noise: NoiseModel, w: &ObservationWindow, t: f64) -> Result<VoiValue> {
    let lag = check_query_time(w, t)?;
    if noise.is_noiseless() {
        return Ok(VoiValue::ZERO);
    }
    let r = window_det_ratio(p, noise, w)?;
    VoiValue::new(0.5 * (r / (2.0 * p.kappa() * lag).exp_m1()).ln_1p())
}

/// Single most recent observation: `−½ln(1 − (γ/(1+γ))e^{−2κ·lag})`.
pub fn voi_single_obs(p: &OuParams, noise: NoiseModel, lag: f64) -> Result<VoiValue> {
    if !(lag >= 0.0) || !lag.is_finite() {
        return Err(VoiError::InvalidParameter {
            name: "lag",
            value: lag,
            reason: "must be finite and >= 0",
        });
    }
    match snr_ratio(p, noise) {
        SnrRatio::Noiseless => markov_voi(p, lag),
        SnrRatio::Finite(gamma) => {
            let e = (-2.0 * p.kappa() * lag).exp();
            VoiValue::new(-0.5 * (-(gamma / (1.0 + gamma)) * e).ln_1p())
        }
    }
}
