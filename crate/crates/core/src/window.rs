//! Sampling timelines, the additive-noise channel and the AoI metric.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{require_nonnegative, require_positive, Result, VoiError};
use crate::rng::{self, SimRng};

/// Minimum separation accepted between generation times.
pub const MIN_TIME_GAP: f64 = 1e-12;

/// Generation and reception instants of a stream of status updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    gen_times: Vec<f64>,
    recv_times: Vec<f64>,
}

impl Timeline {
    pub fn new(gen_times: Vec<f64>, recv_times: Vec<f64>) -> Result<Self> {
        if gen_times.len() != recv_times.len() {
            return Err(VoiError::DimensionMismatch(format!(
                "{} generation times vs {} reception times",
                gen_times.len(),
                recv_times.len()
            )));
        }
        for i in 0..gen_times.len() {
            if !gen_times[i].is_finite() || !recv_times[i].is_finite() {
                return Err(VoiError::InvalidParameter {
                    name: "timeline",
                    value: f64::NAN,
                    reason: "times must be finite",
                });
            }
            if !(recv_times[i] > gen_times[i]) {
                return Err(VoiError::InvalidParameter {
                    name: "recv_time",
                    value: recv_times[i],
                    reason: "reception must follow generation",
                });
            }
            if i > 0 {
                if !(gen_times[i] > gen_times[i - 1]) {
                    return Err(VoiError::NonMonotoneTimes { index: i });
                }
                if recv_times[i] < recv_times[i - 1] {
                    return Err(VoiError::NonMonotoneTimes { index: i });
                }
            }
        }
        Ok(Self {
            gen_times,
            recv_times,
        })
    }

    pub fn len(&self) -> usize {
        self.gen_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gen_times.is_empty()
    }

    pub fn gen_times(&self) -> &[f64] {
        &self.gen_times
    }

    pub fn recv_times(&self) -> &[f64] {
        &self.recv_times
    }

    /// Number of updates with `t′_i ≤ t`.
    pub fn received_by(&self, t: f64) -> usize {
        self.recv_times.partition_point(|&r| r <= t)
    }

    /// Window of the last `m` updates received by time `t`.
    pub fn window_at(&self, t: f64, m: usize) -> Result<ObservationWindow> {
        let n = self.received_by(t);
        if n == 0 {
            return Err(VoiError::NoUpdateReceived { t });
        }
        if m == 0 || m > n {
            return Err(VoiError::InsufficientUpdates {
                requested: m,
                available: n,
            });
        }
        ObservationWindow::from_gen_times(self.gen_times[n - m..n].to_vec())
    }

    /// Writes `index,gen_time,recv_time` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "gen_time", "recv_time"])?;
        for (i, (g, r)) in self.gen_times.iter().zip(&self.recv_times).enumerate() {
            w.write_record([(i + 1).to_string(), g.to_string(), r.to_string()])?;
        }
        w.flush()
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let mut gen = Vec::new();
        let mut recv = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| VoiError::DimensionMismatch(e.to_string()))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| VoiError::DimensionMismatch(format!("bad timeline row {rec:?}")))
            };
            gen.push(field(1)?);
            recv.push(field(2)?);
        }
        Self::new(gen, recv)
    }
}

/// The most recent `m` generation times feeding a VoI query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    gen_times: Vec<f64>,
    intervals: Vec<f64>,
    y_values: Option<Vec<f64>>,
}

impl ObservationWindow {
    pub fn from_gen_times(gen_times: Vec<f64>) -> Result<Self> {
        if gen_times.is_empty() {
            return Err(VoiError::Degenerate("window needs at least one update"));
        }
        let mut intervals = Vec::with_capacity(gen_times.len() - 1);
        for (i, w) in gen_times.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if !(gap > 0.0) {
                return Err(VoiError::NonMonotoneTimes { index: i + 1 });
            }
            if gap < MIN_TIME_GAP {
                return Err(VoiError::DuplicateTimestamps {
                    index: i + 1,
                    min_gap: MIN_TIME_GAP,
                });
            }
            intervals.push(gap);
        }
        Ok(Self {
            gen_times,
            intervals,
            y_values: None,
        })
    }

    /// `m` uniformly spaced updates ending at `last_time`.
    pub fn uniform(dt: f64, m: usize, last_time: f64) -> Result<Self> {
        require_positive("dt", dt)?;
        if m == 0 {
            return Err(VoiError::Degenerate("window needs at least one update"));
        }
        let times = (0..m).map(|i| last_time - (m - 1 - i) as f64 * dt).collect();
        Self::from_gen_times(times)
    }

    pub fn with_values(mut self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.gen_times.len() {
            return Err(VoiError::DimensionMismatch(format!(
                "{} values for {} updates",
                y.len(),
                self.gen_times.len()
            )));
        }
        self.y_values = Some(y);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.gen_times.len()
    }

    pub fn gen_times(&self) -> &[f64] {
        &self.gen_times
    }

    /// `T_2..T_m`.
    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    pub fn y_values(&self) -> Option<&[f64]> {
        self.y_values.as_deref()
    }

    /// `t_n`, the most recent generation time.
    pub fn last_time(&self) -> f64 {
        *self.gen_times.last().expect("window is nonempty")
    }

    /// The last `k` updates of this window.
    pub fn suffix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.m() {
            return Err(VoiError::InsufficientUpdates {
                requested: k,
                available: self.m(),
            });
        }
        let mut w = Self::from_gen_times(self.gen_times[self.m() - k..].to_vec())?;
        if let Some(y) = &self.y_values {
            w.y_values = Some(y[y.len() - k..].to_vec());
        }
        Ok(w)
    }
}

/// Additive i.i.d. Gaussian observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma_n2: f64,
}

impl NoiseModel {
    pub fn new(sigma_n2: f64) -> Result<Self> {
        Ok(Self {
            sigma_n2: require_nonnegative("noise_var", sigma_n2)?,
        })
    }

    pub fn noiseless() -> Self {
        Self { sigma_n2: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.sigma_n2
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_n2 == 0.0
    }
}

/// `{dt, 2dt, …, n·dt}`.
pub fn uniform_timeline(dt: f64, n: usize) -> Result<Vec<f64>> {
    require_positive("dt", dt)?;
    Ok((1..=n).map(|i| i as f64 * dt).collect())
}

/// Arrival instants of a rate-`lambda` Poisson process started at 0.
pub fn poisson_timeline(lambda: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    poisson_timeline_with(lambda, n, &mut rng::seeded(seed))
}

pub fn poisson_timeline_with(lambda: f64, n: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    require_positive("rate", lambda)?;
    let gap = Exp::new(lambda).expect("rate checked");
    let mut t = 0.0;
    Ok((0..n)
        .map(|_| {
            t += rng.sample(gap);
            t
        })
        .collect())
}

/// `Y_i = X_i + N_i` with `N_i ~ N(0, σ_n²)` i.i.d.
pub fn observe(x_values: &[f64], noise: NoiseModel, seed: u64) -> Vec<f64> {
    observe_with(x_values, noise, &mut rng::seeded(seed))
}

pub fn observe_with(x_values: &[f64], noise: NoiseModel, rng: &mut SimRng) -> Vec<f64> {
    if noise.is_noiseless() {
        return x_values.to_vec();
    }
    let sd = noise.variance().sqrt();
    x_values
        .iter()
        .map(|x| {
            let z: f64 = rng.sample(StandardNormal);
            x + sd * z
        })
        .collect()
}

/// `Δ(t) = t − u(t)` where `u(t)` is the generation time of the latest
/// update received by `t` (an update received exactly at `t` counts).
pub fn age_of_information(tl: &Timeline, t: f64) -> Result<f64> {
    let n = tl.received_by(t);
    if n == 0 {
        return Err(VoiError::NoUpdateReceived { t });
    }
    Ok(t - tl.gen_times[n - 1])
}
