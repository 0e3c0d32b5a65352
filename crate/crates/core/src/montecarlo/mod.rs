//! Monte Carlo harness: statistical comparators, plug-in MI estimation
//! and figure reproduction.

mod experiment;
mod table;

pub use experiment::{defaults_for, run_experiment, ExperimentSpec, FigureId, ParamGrid, DEFAULTS_VERSION};
pub use table::{DataTable, TableMeta};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, VoiError};
use crate::gauss_markov::{sample_path_with, OuParams};
use crate::linalg::DenseMatrix;
use crate::rng::SimRng;
use crate::voi_exact::VoiValue;
use crate::window::{NoiseModel, ObservationWindow};

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// `cdf`. Returns NaN for an empty sample.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Plug-in Gaussian MI between a window `Y` and a scalar `x` from paired
/// draws: the sample covariance of `(Y, x)` fed into the Gaussian formula.
///
/// Positively biased by roughly `m/(2N)` nats; no correction is applied.
pub fn empirical_gaussian_mi(samples: &[(Vec<f64>, f64)]) -> Result<VoiValue> {
    let m = samples.first().map_or(0, |s| s.0.len());
    if m == 0 {
        return Err(VoiError::Degenerate("windows must hold at least one observation"));
    }
    let required = 10 * (m + 1);
    if samples.len() <= required {
        return Err(VoiError::InsufficientSamples {
            required,
            got: samples.len(),
        });
    }
    if let Some(bad) = samples.iter().find(|s| s.0.len() != m) {
        return Err(VoiError::DimensionMismatch(format!(
            "window of length {} among windows of length {m}",
            bad.0.len()
        )));
    }
    let d = m + 1;
    let n = samples.len() as f64;
    let coord = |s: &(Vec<f64>, f64), k: usize| if k < m { s.0[k] } else { s.1 };
    let mean: Vec<f64> = (0..d).map(|k| samples.iter().map(|s| coord(s, k)).sum::<f64>() / n).collect();
    let mut cov = DenseMatrix::zeros(d);
    for s in samples {
        for i in 0..d {
            let di = coord(s, i) - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (coord(s, j) - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    // with x ordered last, the last Cholesky pivot is Var(x | Y)
    let chol = cov.cholesky().map_err(|e| match e {
        VoiError::NotPositiveDefinite { minor } => VoiError::RankDeficient { minor },
        other => other,
    })?;
    let l = chol.factor(m, m);
    VoiValue::new((0.5 * (cov[(m, m)] / (l * l)).ln()).max(0.0))
}

/// Draws `n` independent `(Y-window, X_t)` pairs from the stationary noisy
/// OU model at the window's generation times and query time `t`.
pub fn sample_windows(
    p: &OuParams,
    noise: NoiseModel,
    w: &ObservationWindow,
    t: f64,
    n: usize,
    rng: &mut SimRng,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut times = w.gen_times().to_vec();
    times.push(t);
    let sd = noise.variance().sqrt();
    (0..n)
        .map(|_| {
            let mut path = sample_path_with(p, &times, rng)?;
            let x = path.pop().expect("query time appended");
            for y in &mut path {
                let z: f64 = rng.sample(StandardNormal);
                *y += sd * z;
            }
            Ok((path, x))
        })
        .collect()
}
