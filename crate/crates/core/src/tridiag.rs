//! Tridiagonal precision matrices of sampled OU windows and their
//! determinant machinery.
//!
//! Any ordered window of an OU process is an irregular AR(1) sequence, so
//! `Σ_X⁻¹` is tridiagonal and `A = σ_n²Σ_X⁻¹ + I` inherits the structure.
//! VoI only needs `det(A)` and the determinant of its leading
//! `(m−1)×(m−1)` block, which the three-term cofactor recurrence yields in
//! O(m). The uniform-sampling closed form (characteristic roots of the
//! Toeplitz recurrence) is kept alongside as an independent route.

use serde::{Deserialize, Serialize};

use crate::error::{require_nonnegative, require_positive, Result, VoiError};
use crate::gauss_markov::OuParams;

/// Largest `m` evaluated by direct powers in the closed form; beyond this
/// the root powers are combined in log-magnitude.
pub const CLOSED_FORM_DIRECT_MAX_M: usize = 64;

/// Smallest one-step correlation accepted by the closed form.
pub const CLOSED_FORM_MIN_RHO: f64 = 1e-8;

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(VoiError::DimensionMismatch(format!(
                "diagonal of length {} needs {} off-diagonal entries, got {}",
                diag.len(),
                diag.len().saturating_sub(1),
                offdiag.len()
            )));
        }
        Ok(Self { diag, offdiag })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            diag: vec![1.0; m],
            offdiag: vec![0.0; m.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|d| d * factor).collect(),
            offdiag: self.offdiag.iter().map(|e| e * factor).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        let mut out = vec![vec![0.0; m]; m];
        for i in 0..m {
            out[i][i] = self.diag[i];
            if i + 1 < m {
                out[i][i + 1] = self.offdiag[i];
                out[i + 1][i] = self.offdiag[i];
            }
        }
        out
    }

    /// Leading principal minors `f_0 = 1, f_1, …, f_m`.
    pub fn leading_minors(&self) -> Vec<f64> {
        let m = self.dim();
        let mut f = Vec::with_capacity(m + 1);
        f.push(1.0);
        f.push(self.diag[0]);
        for k in 1..m {
            let next = self.diag[k] * f[k] - self.offdiag[k - 1].powi(2) * f[k - 1];
            f.push(next);
        }
        f
    }
}

/// `det(A)` together with `det(A_mm)`, the determinant after deleting the
/// last row and column (1 when `A` is 1×1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPair {
    pub det_a: f64,
    pub det_amm: f64,
}

/// `R = 1/(1 − e^{−2κT})` and `R − 1 = 1/(e^{2κT} − 1)`, both without
/// cancellation.
fn r_and_r_minus_one(kappa: f64, interval: f64) -> (f64, f64) {
    let x = 2.0 * kappa * interval;
    (-1.0 / (-x).exp_m1(), 1.0 / x.exp_m1())
}

/// Precision of a uniformly sampled window (`ρ = e^{−κΔt}`).
pub fn uniform_inverse_cov(p: &OuParams, dt: f64, m: usize) -> Result<SymTridiag> {
    require_positive("dt", dt)?;
    if m == 0 {
        return Err(VoiError::Degenerate("window size m must be at least 1"));
    }
    let kappa = p.kappa();
    let base = 2.0 * kappa / (p.sigma() * p.sigma());
    if m == 1 {
        return SymTridiag::new(vec![base], vec![]);
    }
    let rho = (-kappa * dt).exp();
    let one_minus_rho2 = -(-2.0 * kappa * dt).exp_m1();
    let scale = base / one_minus_rho2;
    let mut diag = vec![scale * (1.0 + rho * rho); m];
    diag[0] = scale;
    diag[m - 1] = scale;
    SymTridiag::new(diag, vec![-scale * rho; m - 1])
}

/// The bracketed matrix of `a_i`, `b_i` for sampling intervals `T_2..T_m`,
/// i.e. `Σ_X⁻¹` divided by `2κ/σ²`.
pub fn precision_coefficients(p: &OuParams, intervals: &[f64]) -> Result<SymTridiag> {
    for &t in intervals {
        require_positive("interval", t)?;
    }
    let m = intervals.len() + 1;
    if m == 1 {
        return SymTridiag::new(vec![1.0], vec![]);
    }
    let rs: Vec<(f64, f64)> = intervals
        .iter()
        .map(|&t| r_and_r_minus_one(p.kappa(), t))
        .collect();
    // rs[j] holds R_{j+2}
    let mut diag = Vec::with_capacity(m);
    diag.push(rs[0].0);
    for i in 1..m - 1 {
        diag.push(rs[i - 1].0 + rs[i].1);
    }
    diag.push(rs[m - 2].0);
    let offdiag = rs.iter().map(|&(r, r1)| -(r * r1).sqrt()).collect();
    SymTridiag::new(diag, offdiag)
}

/// Precision of a window with arbitrary sampling intervals `T_2..T_m`.
pub fn poisson_inverse_cov(p: &OuParams, intervals: &[f64]) -> Result<SymTridiag> {
    let base = 2.0 * p.kappa() / (p.sigma() * p.sigma());
    Ok(precision_coefficients(p, intervals)?.scaled(base))
}

/// `A = σ_n²·Σ_X⁻¹ + I`.
pub fn matrix_a(inv_cov: &SymTridiag, sigma_n2: f64) -> Result<SymTridiag> {
    require_nonnegative("noise_var", sigma_n2)?;
    let mut a = inv_cov.scaled(sigma_n2);
    for d in &mut a.diag {
        *d += 1.0;
    }
    Ok(a)
}

/// `(f_m, f_{m−1})` from the leading-minor recurrence
/// `f_k = d_k f_{k−1} − e_{k−1}² f_{k−2}`, `f_0 = 1`.
pub fn det_pair_recurrence(a: &SymTridiag) -> DetPair {
    let f = a.leading_minors();
    let m = a.dim();
    DetPair {
        det_a: f[m],
        det_amm: f[m - 1],
    }
}

/// `det(A_mm)/(γ·det(A))`.
pub fn det_ratio(dp: &DetPair, gamma: f64) -> f64 {
    dp.det_amm / (gamma * dp.det_a)
}

/// Entries `(a, b, c)` of `A` for uniform sampling: corner, off-diagonal
/// and interior diagonal.
pub fn uniform_abc(p: &OuParams, dt: f64, sigma_n2: f64) -> Result<(f64, f64, f64)> {
    require_positive("dt", dt)?;
    require_nonnegative("noise_var", sigma_n2)?;
    let inv_gamma = 2.0 * p.kappa() * sigma_n2 / (p.sigma() * p.sigma());
    let rho = (-p.kappa() * dt).exp();
    let one_minus_rho2 = -(-2.0 * p.kappa() * dt).exp_m1();
    let s = inv_gamma / one_minus_rho2;
    Ok((s + 1.0, -rho * s, (1.0 + rho * rho) * s + 1.0))
}

/// Roots of `λ² + (c/b)λ + 1 = 0`, in the order `(−c ± √(c²−4b²))/(2b)`.
pub fn characteristic_roots(b: f64, c: f64) -> Result<(f64, f64)> {
    let disc = c * c - 4.0 * b * b;
    if !(disc > 0.0) || b == 0.0 {
        return Err(VoiError::Degenerate("characteristic roots are not distinct and real"));
    }
    let sq = disc.sqrt();
    Ok(((-c + sq) / (2.0 * b), (-c - sq) / (2.0 * b)))
}

/// Sum `Σ coeff·(λ₁^k − λ₂^k)` as `(sign, ln|·|)`, factoring out the
/// dominant root so large exponents never overflow.
fn log_root_combination(l1: f64, l2: f64, terms: &[(f64, i32)]) -> (f64, f64) {
    let (big, small, flip) = if l2.abs() >= l1.abs() {
        (l2, l1, 1.0)
    } else {
        (l1, l2, -1.0)
    };
    // λ₁^k − λ₂^k = −flip·big^k·(1 − (small/big)^k)
    let kmax = terms.iter().map(|t| t.1).max().expect("terms nonempty");
    let q = small / big;
    let s: f64 = terms
        .iter()
        .map(|&(c, k)| c * big.powi(k - kmax) * (1.0 - q.powi(k)))
        .sum();
    let sign = -flip * big.signum().powi(kmax) * s.signum();
    (sign, kmax as f64 * big.abs().ln() + s.abs().ln())
}

struct UniformClosed {
    sign_a: f64,
    ln_a: f64,
    sign_amm: f64,
    ln_amm: f64,
}

fn uniform_closed_parts(p: &OuParams, dt: f64, sigma_n2: f64, m: usize) -> Result<Option<UniformClosed>> {
    if m < 3 {
        return Ok(None);
    }
    let rho = (-p.kappa() * dt).exp();
    if rho < CLOSED_FORM_MIN_RHO {
        return Err(VoiError::Degenerate("closed form needs rho >= 1e-8"));
    }
    if sigma_n2 == 0.0 {
        return Err(VoiError::Degenerate("closed form needs noise_var > 0"));
    }
    let (a, b, c) = uniform_abc(p, dt, sigma_n2)?;
    let (l1, l2) = match characteristic_roots(b, c) {
        Ok(r) => r,
        Err(_) => return Ok(None),
    };
    let mi = m as i32;
    let ln_disc = 0.5 * (c * c - 4.0 * b * b).ln();
    let parity = |k: i32| if k % 2 == 0 { 1.0 } else { -1.0 };

    let (sa, la) = if m <= CLOSED_FORM_DIRECT_MAX_M {
        let d = |k: i32| l1.powi(k) - l2.powi(k);
        let s = a * a * d(mi - 1) + 2.0 * a * b * d(mi - 2) + b * b * d(mi - 3);
        (s.signum(), s.abs().ln())
    } else {
        log_root_combination(l1, l2, &[(a * a, mi - 1), (2.0 * a * b, mi - 2), (b * b, mi - 3)])
    };
    let (sm, lm) = if m <= CLOSED_FORM_DIRECT_MAX_M {
        let d = |k: i32| l1.powi(k) - l2.powi(k);
        let s = a * c * d(mi - 2) + (a * b + b * c) * d(mi - 3) + b * b * d(mi - 4);
        (s.signum(), s.abs().ln())
    } else {
        log_root_combination(
            l1,
            l2,
            &[(a * c, mi - 2), (a * b + b * c, mi - 3), (b * b, mi - 4)],
        )
    };
    Ok(Some(UniformClosed {
        sign_a: parity(mi) * b.signum().powi(mi - 1) * sa,
        ln_a: (mi - 1) as f64 * b.abs().ln() - ln_disc + la,
        sign_amm: parity(mi - 1) * b.signum().powi(mi - 2) * sm,
        ln_amm: (mi - 2) as f64 * b.abs().ln() - ln_disc + lm,
    }))
}

/// `det(A)` and `det(A_mm)` for uniform sampling from the characteristic
/// root closed form. Sizes below 3 and repeated roots fall back to the
/// recurrence.
pub fn det_pair_uniform_closed(p: &OuParams, dt: f64, sigma_n2: f64, m: usize) -> Result<DetPair> {
    match uniform_closed_parts(p, dt, sigma_n2, m)? {
        Some(u) => Ok(DetPair {
            det_a: u.sign_a * u.ln_a.exp(),
            det_amm: u.sign_amm * u.ln_amm.exp(),
        }),
        None => {
            let inv = uniform_inverse_cov(p, dt, m)?;
            Ok(det_pair_recurrence(&matrix_a(&inv, sigma_n2)?))
        }
    }
}

/// `det(A_mm)/(γ det(A))` for uniform sampling via the closed form, formed
/// from log-magnitudes so it stays finite for any `m`.
pub fn uniform_det_ratio_closed(p: &OuParams, dt: f64, sigma_n2: f64, m: usize) -> Result<f64> {
    let gamma = p.stationary_variance() / require_positive("noise_var", sigma_n2)?;
    match uniform_closed_parts(p, dt, sigma_n2, m)? {
        Some(u) => Ok(u.sign_a * u.sign_amm * (u.ln_amm - u.ln_a).exp() / gamma),
        None => Ok(det_ratio(&det_pair_uniform_closed(p, dt, sigma_n2, m)?, gamma)),
    }
}

/// The explicit λ-form of the uniform determinant ratio,
/// `((1−ρ²)/ρ)·N/D` with `N`, `D` the bracketed root combinations.
pub fn uniform_det_ratio_lambda_form(p: &OuParams, dt: f64, sigma_n2: f64, m: usize) -> Result<f64> {
    if m < 3 {
        return Err(VoiError::Degenerate("lambda form needs m >= 3"));
    }
    let (a, b, c) = uniform_abc(p, dt, sigma_n2)?;
    let (l1, l2) = characteristic_roots(b, c)?;
    let rho = (-p.kappa() * dt).exp();
    let mi = m as i32;
    let d = |k: i32| l1.powi(k) - l2.powi(k);
    let num = a * c * d(mi - 2) + (a * b + b * c) * d(mi - 3) + b * b * d(mi - 4);
    let den = a * a * d(mi - 1) + 2.0 * a * b * d(mi - 2) + b * b * d(mi - 3);
    Ok((1.0 - rho * rho) / rho * num / den)
}

/// Coefficients `(1, c₁, c₂)` of `f_k ≈ 1 + c₁/γ + c₂/γ²` for the matrix
/// `(1/γ)·[a, b] + I`:
/// `c₁ = Σ_{i≤k} a_i`, `c₂ = Σ_{i<j≤k} a_i a_j − Σ_{i<k} b_i²`.
pub fn fk_expansion_coeffs(a_seq: &[f64], b_seq: &[f64], k: usize) -> Result<(f64, f64, f64)> {
    let m = a_seq.len();
    if b_seq.len() + 1 != m {
        return Err(VoiError::DimensionMismatch(format!(
            "{} diagonal entries need {} off-diagonal entries",
            m,
            m.saturating_sub(1)
        )));
    }
    if k == 0 || k > m {
        return Err(VoiError::InvalidParameter {
            name: "k",
            value: k as f64,
            reason: "must satisfy 1 <= k <= m",
        });
    }
    let (mut sum, mut pairs) = (0.0, 0.0);
    for &a in &a_seq[..k] {
        pairs += a * sum;
        sum += a;
    }
    let b2: f64 = b_seq[..k - 1].iter().map(|b| b * b).sum();
    Ok((1.0, sum, pairs - b2))
}
