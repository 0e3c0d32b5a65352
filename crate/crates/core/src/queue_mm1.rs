//! FCFS M/M/1 status-update queue and the worst-case VoI it induces.
//!
//! With a single-sample window the VoI just before update `n+1` lands is
//! `V_n = g(Z)`, `Z = S_{n+1} + T_{n+1}` (system time plus interarrival
//! gap). The density of `Z` is known in closed form, so `V_n` has an
//! explicit density and distribution on `(0, ½ln(1+γ)]`.

use rand::Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{require_nonnegative, require_positive, Result, VoiError};
use crate::gauss_markov::OuParams;
use crate::rng::{self, SimRng};
use crate::window::Timeline;

/// Default number of leading updates dropped before steady state.
pub const DEFAULT_WARMUP: usize = 10_000;

/// Arrival and service rates of a stable M/M/1 queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mm1Params {
    lambda: f64,
    mu: f64,
}

impl Mm1Params {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        require_positive("rate", lambda)?;
        require_positive("mu", mu)?;
        if lambda >= mu {
            return Err(VoiError::UnstableQueue { lambda, mu });
        }
        Ok(Self { lambda, mu })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn load(&self) -> f64 {
        self.lambda / self.mu
    }
}

/// Reception instants of a FCFS single server: `t'_i = max(t'_{i−1}, t_i) + W_i`.
pub fn fcfs_receptions(gen_times: &[f64], service: &[f64]) -> Result<Vec<f64>> {
    if gen_times.len() != service.len() {
        return Err(VoiError::DimensionMismatch(format!(
            "{} generation times vs {} service times",
            gen_times.len(),
            service.len()
        )));
    }
    let mut out = Vec::with_capacity(gen_times.len());
    let mut free_at = f64::NEG_INFINITY;
    for (&t, &w) in gen_times.iter().zip(service) {
        require_nonnegative("service", w)?;
        free_at = free_at.max(t) + w;
        out.push(free_at);
    }
    Ok(out)
}

/// Steady-state trace of a FCFS queue after the warm-up prefix.
///
/// Quantities are kept as increments; absolute times over long runs lose
/// precision, so [`FcfsTrace::timeline`] rebuilds them starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FcfsTrace {
    /// `T_i`: gap between generation of update `i−1` and `i`.
    pub gaps: Vec<f64>,
    /// `W_i`: service time.
    pub service: Vec<f64>,
    /// `S_i`: waiting plus service time.
    pub system_times: Vec<f64>,
}

impl FcfsTrace {
    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Generation/reception timeline with the first emitted update
    /// generated at its gap after time 0.
    pub fn timeline(&self) -> Result<Timeline> {
        let mut gen = Vec::with_capacity(self.len());
        let mut t = 0.0;
        for &g in &self.gaps {
            t += g;
            gen.push(t);
        }
        let recv = gen.iter().zip(&self.system_times).map(|(g, s)| g + s).collect();
        Timeline::new(gen, recv)
    }

    /// `Z_i = S_i + T_i` for every emitted update.
    pub fn worst_case_lags(&self) -> Vec<f64> {
        self.gaps.iter().zip(&self.system_times).map(|(t, s)| t + s).collect()
    }
}

/// Simulates `n_updates` steady-state updates after the default warm-up.
pub fn simulate_fcfs(q: &Mm1Params, n_updates: usize, seed: u64) -> FcfsTrace {
    simulate_fcfs_with(q, n_updates, DEFAULT_WARMUP, &mut rng::seeded(seed))
}

/// Lindley recursion `S_i = max(S_{i−1} − T_i, 0) + W_i`, which is the
/// reception rule above written in increments.
pub fn simulate_fcfs_with(q: &Mm1Params, n_updates: usize, warmup: usize, rng: &mut SimRng) -> FcfsTrace {
    let arrivals = Exp::new(q.lambda).expect("validated rate");
    let services = Exp::new(q.mu).expect("validated rate");
    let mut trace = FcfsTrace {
        gaps: Vec::with_capacity(n_updates),
        service: Vec::with_capacity(n_updates),
        system_times: Vec::with_capacity(n_updates),
    };
    let mut s_prev = 0.0f64;
    for i in 0..warmup + n_updates {
        let t: f64 = rng.sample(arrivals);
        let w: f64 = rng.sample(services);
        // the first update finds an empty system
        let s = if i == 0 { w } else { (s_prev - t).max(0.0) + w };
        s_prev = s;
        if i >= warmup {
            trace.gaps.push(t);
            trace.service.push(w);
            trace.system_times.push(s);
        }
    }
    trace
}

/// Steady-state joint density of the gap `T_{n+1} = t` and system time
/// `S_{n+1} = s`.
pub fn joint_density_ts(t: f64, s: f64, q: &Mm1Params) -> Result<f64> {
    require_nonnegative("t", t)?;
    require_nonnegative("s", s)?;
    let (l, m) = (q.lambda, q.mu);
    let v = l * m * (-l * t - m * s).exp() - m * m * (-m * (t + s)).exp()
        + m * (m - l) * (-m * t - (m - l) * s).exp();
    Ok(v.max(0.0))
}

/// Density of `Z = S + T`.
pub fn density_z(z: f64, q: &Mm1Params) -> Result<f64> {
    require_nonnegative("z", z)?;
    let (l, m) = (q.lambda, q.mu);
    let d = m - l;
    let v = m * ((l / d) * (-l * z).exp() - (l / d + m * z + d / l) * (-m * z).exp()
        + (d / l) * (-d * z).exp());
    Ok(v.max(0.0))
}

/// `P(Z > z)`.
pub fn survival_z(z: f64, q: &Mm1Params) -> Result<f64> {
    require_nonnegative("z", z)?;
    let (l, m) = (q.lambda, q.mu);
    let d = m - l;
    let v = (m / d) * (-l * z).exp() + (m / l) * (-d * z).exp()
        - (l / d + d / l + 1.0 + m * z) * (-m * z).exp();
    Ok(v.clamp(0.0, 1.0))
}

fn require_gamma(gamma: f64) -> Result<f64> {
    require_positive("gamma", gamma)
}

/// Upper end `½ln(1+γ)` of the worst-case VoI support.
pub fn support_max(gamma: f64) -> Result<f64> {
    Ok(0.5 * require_gamma(gamma)?.ln_1p())
}

/// Single-observation VoI at lag `z`: `−½ln(1 − (γ/(1+γ))e^{−2κz})`.
pub fn g_map(p: &OuParams, z: f64, gamma: f64) -> Result<f64> {
    require_nonnegative("z", z)?;
    let gamma = require_gamma(gamma)?;
    let frac = gamma / (1.0 + gamma);
    Ok(-0.5 * (-frac * (-2.0 * p.kappa() * z).exp()).ln_1p())
}

/// `r(v) = (1+γ)(1−e^{−2v})/γ`, equal to `e^{−2κ g⁻¹(v)}`.
fn r_of_v(v: f64, gamma: f64) -> f64 {
    -(1.0 + gamma) * (-2.0 * v).exp_m1() / gamma
}

fn check_interior(v: f64, gamma: f64) -> Result<f64> {
    let upper = support_max(gamma)?;
    if !(v > 0.0 && v < upper) {
        return Err(VoiError::OutsideSupport { value: v, upper });
    }
    Ok(upper)
}

/// Inverse of [`g_map`] on `(0, ½ln(1+γ)]`.
pub fn g_inverse(p: &OuParams, v: f64, gamma: f64) -> Result<f64> {
    let upper = support_max(gamma)?;
    if !(v > 0.0 && v <= upper) {
        return Err(VoiError::OutsideSupport { value: v, upper });
    }
    let z = -r_of_v(v, gamma).ln() / (2.0 * p.kappa());
    Ok(z.max(0.0))
}

/// `|d g⁻¹/dv| = e^{−2v}/(κ(1−e^{−2v}))`.
pub fn g_inverse_jacobian(p: &OuParams, v: f64) -> f64 {
    1.0 / (p.kappa() * (2.0 * v).exp_m1())
}

/// Density of the worst-case VoI written in terms of `r(v)`.
///
/// Zero outside the support; the open endpoints themselves are rejected.
pub fn worst_case_pdf(v: f64, q: &Mm1Params, p: &OuParams, gamma: f64) -> Result<f64> {
    let upper = support_max(gamma)?;
    if v == 0.0 || v == upper {
        return Err(VoiError::OutsideSupport { value: v, upper });
    }
    if !(v > 0.0 && v < upper) {
        return Ok(0.0);
    }
    let (l, m, k) = (q.lambda, q.mu, p.kappa());
    let d = m - l;
    let r = r_of_v(v, gamma);
    let ln_r = r.ln();
    let pow = |e: f64| (e * ln_r / (2.0 * k)).exp();
    let bracket = (l / d) * pow(l) - (l / d + d / l - m * ln_r / (2.0 * k)) * pow(m) + (d / l) * pow(d);
    Ok((m * g_inverse_jacobian(p, v) * bracket).max(0.0))
}

/// `P(V ≤ v) = P(Z ≥ g⁻¹(v))`, evaluated through the survival of `Z`.
///
/// Same support convention as [`worst_case_pdf`]: 0 below, 1 above.
pub fn worst_case_cdf(v: f64, q: &Mm1Params, p: &OuParams, gamma: f64) -> Result<f64> {
    let upper = support_max(gamma)?;
    if v == 0.0 || v == upper {
        return Err(VoiError::OutsideSupport { value: v, upper });
    }
    if v < 0.0 {
        return Ok(0.0);
    }
    if v > upper {
        return Ok(1.0);
    }
    survival_z(g_inverse(p, v, gamma)?, q)
}

/// The commonly quoted closed form of the CDF. Its first two coefficients
/// are `(μ−λ)/μ` and `λ/μ` where the survival of `Z` has `μ/(μ−λ)` and
/// `μ/λ`, so it does not reach 1 at the top of the support. Kept for
/// comparison only.
pub fn worst_case_cdf_quoted(v: f64, q: &Mm1Params, p: &OuParams, gamma: f64) -> Result<f64> {
    check_interior(v, gamma)?;
    let (l, m, k) = (q.lambda, q.mu, p.kappa());
    let d = m - l;
    let r = r_of_v(v, gamma);
    let ln_r = r.ln();
    let expo = 1.0 + 2.0 * v / ln_r;
    let term = |rate: f64| (-v * rate / k).exp() * r.powf(rate / (2.0 * k) * expo);
    Ok((d / m) * term(l) + (l / m) * term(d) + (1.0 - m * m / (l * d) + m / (2.0 * k) * ln_r) * term(m))
}

/// Draws worst-case VoI samples `g(S+T)` from one long FCFS run, keeping
/// every `thin`-th update to weaken the serial correlation of `S`.
pub fn worst_case_samples(
    q: &Mm1Params,
    p: &OuParams,
    gamma: f64,
    n: usize,
    thin: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    require_gamma(gamma)?;
    let thin = thin.max(1);
    let trace = simulate_fcfs_with(q, n * thin, DEFAULT_WARMUP, rng);
    trace
        .worst_case_lags()
        .into_iter()
        .step_by(thin)
        .map(|z| g_map(p, z, gamma))
        .collect()
}
