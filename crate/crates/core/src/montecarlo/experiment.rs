//! Figure reproduction and parameter sweeps.
//!
//! Each figure has a registry entry with the caption parameters; any field
//! can be overridden before calling [`run_experiment`]. Replication `r`
//! always draws from stream `r` of the spec seed, so every grid point of a
//! replication sees the same random numbers and the table is independent
//! of thread scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::table::{DataTable, TableMeta};
use super::{empirical_gaussian_mi, ks_distance, sample_windows};
use crate::approx::{voi_high_snr_poisson, voi_high_snr_uniform, voi_low_snr_uniform};
use crate::error::{Result, VoiError};
use crate::gauss_markov::OuParams;
use crate::queue_mm1::{self, Mm1Params};
use crate::rng::{self, SimRng};
use crate::voi_exact::{correction, markov_voi, voi_closed_form};
use crate::window::{age_of_information, NoiseModel, ObservationWindow, Timeline};

/// Bumped whenever a registry default changes.
pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureId {
    /// VoI against time for one queued uniform stream (id 2).
    TimeEvolution,
    /// Normalized VoI against window length (id 3).
    WindowLength,
    /// Exact vs high-SNR VoI, uniform sampling (id 4).
    HighSnrUniform,
    /// Exact vs high-SNR VoI, Poisson sampling (id 5).
    HighSnrPoisson,
    /// VoI against the Poisson sampling rate (id 6).
    SamplingRate,
    /// Worst-case VoI density (id 7).
    WorstCasePdf,
    /// Worst-case VoI distribution function (id 8).
    WorstCaseCdf,
    /// Exact vs low-SNR VoI, uniform sampling (`low-snr`).
    LowSnrUniform,
    /// Deterministic grid over κ, σ_n², m and lag (`sweep`).
    Sweep,
}

impl FigureId {
    pub const ALL: [FigureId; 9] = [
        FigureId::TimeEvolution,
        FigureId::WindowLength,
        FigureId::HighSnrUniform,
        FigureId::HighSnrPoisson,
        FigureId::SamplingRate,
        FigureId::WorstCasePdf,
        FigureId::WorstCaseCdf,
        FigureId::LowSnrUniform,
        FigureId::Sweep,
    ];

    pub fn key(self) -> &'static str {
        match self {
            FigureId::TimeEvolution => "2",
            FigureId::WindowLength => "3",
            FigureId::HighSnrUniform => "4",
            FigureId::HighSnrPoisson => "5",
            FigureId::SamplingRate => "6",
            FigureId::WorstCasePdf => "7",
            FigureId::WorstCaseCdf => "8",
            FigureId::LowSnrUniform => "low-snr",
            FigureId::Sweep => "sweep",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.key() == s)
            .ok_or_else(|| format!("unknown figure `{s}` (expected 2..8, low-snr or sweep)"))
    }
}

/// Parameter grid. Each figure reads the fields it needs; the others are
/// carried along unchanged so the spec hash covers them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub kappa: Vec<f64>,
    pub theta: f64,
    pub sigma: f64,
    pub noise_var: Vec<f64>,
    /// Uniform sampling interval.
    pub dt: f64,
    /// Poisson sampling rates.
    pub rate: Vec<f64>,
    /// Service rate of the FCFS queue.
    pub mu: f64,
    pub m: Vec<usize>,
    /// Query time (end of the time axis for the time-evolution figure).
    pub t: f64,
    /// Query lags for the sweep.
    pub lag: Vec<f64>,
    /// Time step of the time-evolution figure.
    pub step: f64,
    /// Histogram bins or CDF grid points.
    pub bins: usize,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self {
            kappa: vec![0.1],
            theta: 0.0,
            sigma: 1.0,
            noise_var: vec![1.0],
            dt: 2.0,
            rate: vec![0.5],
            mu: 1.0,
            m: vec![1],
            t: 100.0,
            lag: vec![1.0],
            step: 0.05,
            bins: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub figure: FigureId,
    pub grid: ParamGrid,
    pub replications: usize,
    /// Monte Carlo draws (worst-case samples, or MI sample size per
    /// replication in a sweep; 0 disables the empirical columns).
    pub samples: usize,
    /// Worst-case sampling keeps every `thin`-th queued update, which
    /// removes most of the serial correlation of system times.
    pub thin: usize,
    pub seed: u64,
    pub defaults_version: u32,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.kappa.is_empty() || g.noise_var.is_empty() || g.rate.is_empty() || g.m.is_empty() || g.lag.is_empty() {
            return Err(VoiError::Degenerate("every grid axis needs at least one value"));
        }
        if self.thin == 0 {
            return Err(VoiError::InvalidParameter {
                name: "thin",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if self.replications == 0 {
            return Err(VoiError::InvalidParameter {
                name: "replications",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        for &k in &g.kappa {
            OuParams::new(k, g.theta, g.sigma)?;
        }
        for &s in &g.noise_var {
            NoiseModel::new(s)?;
        }
        for &r in &g.rate {
            if needs_queue(self.figure) {
                Mm1Params::new(r, g.mu)?;
            }
        }
        if g.m.contains(&0) {
            return Err(VoiError::Degenerate("window sizes must be at least 1"));
        }
        crate::error::require_positive("dt", g.dt)?;
        crate::error::require_positive("t", g.t)?;
        crate::error::require_positive("step", g.step)?;
        if g.bins == 0 {
            return Err(VoiError::Degenerate("bins must be at least 1"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

fn needs_queue(f: FigureId) -> bool {
    matches!(
        f,
        FigureId::HighSnrPoisson | FigureId::SamplingRate | FigureId::WorstCasePdf | FigureId::WorstCaseCdf
    )
}

fn steps(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start + k as f64 * step).collect()
}

/// Caption parameters for a figure, at the given seed.
pub fn defaults_for(figure: FigureId, seed: u64) -> ExperimentSpec {
    let base = ParamGrid::default();
    let (grid, replications, samples) = match figure {
        FigureId::TimeEvolution => (
            ParamGrid { kappa: vec![0.1], noise_var: vec![1.0], dt: 2.0, t: 40.0, ..base },
            1,
            0,
        ),
        FigureId::WindowLength => (
            ParamGrid {
                kappa: vec![0.05],
                noise_var: vec![0.1, 2.0, 5.0, 10.0],
                m: (1..=20).collect(),
                ..base
            },
            200,
            0,
        ),
        FigureId::HighSnrUniform => (
            ParamGrid {
                kappa: vec![0.05, 0.1, 0.2],
                noise_var: steps(0.02, 0.02, 100),
                m: vec![5],
                ..base
            },
            200,
            0,
        ),
        FigureId::HighSnrPoisson => (
            ParamGrid {
                kappa: vec![0.05, 0.1, 0.2],
                noise_var: steps(0.02, 0.02, 100),
                rate: vec![0.5],
                m: vec![5],
                ..base
            },
            500,
            0,
        ),
        FigureId::LowSnrUniform => (
            ParamGrid {
                kappa: vec![0.25, 0.3, 0.35],
                noise_var: steps(0.5, 0.5, 40),
                m: vec![5],
                ..base
            },
            200,
            0,
        ),
        FigureId::SamplingRate => (
            ParamGrid {
                kappa: vec![0.05, 0.1, 0.2],
                noise_var: vec![0.5],
                rate: steps(0.05, 0.05, 19),
                m: vec![2],
                ..base
            },
            20_000,
            0,
        ),
        FigureId::WorstCasePdf => (
            ParamGrid { kappa: vec![0.1], noise_var: vec![0.5], rate: vec![0.5], bins: 100, ..base },
            1,
            1_000_000,
        ),
        FigureId::WorstCaseCdf => (
            ParamGrid {
                kappa: vec![0.05, 0.1, 0.2, 0.3],
                noise_var: vec![0.5, 1.0],
                rate: vec![0.5],
                bins: 200,
                ..base
            },
            1,
            200_000,
        ),
        FigureId::Sweep => (
            ParamGrid {
                kappa: vec![0.1],
                noise_var: vec![0.1, 0.5, 1.0],
                m: vec![1, 2, 5],
                lag: vec![1.0, 2.0],
                ..base
            },
            30,
            0,
        ),
    };
    let thin = if matches!(figure, FigureId::WorstCasePdf | FigureId::WorstCaseCdf) { 10 } else { 1 };
    ExperimentSpec {
        figure,
        grid,
        replications,
        samples,
        thin,
        seed,
        defaults_version: DEFAULTS_VERSION,
    }
}

/// Runs the experiment and returns its table with the spec embedded.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<DataTable> {
    spec.validate()?;
    let mut extra = Map::new();
    let (columns, rows) = match spec.figure {
        FigureId::TimeEvolution => time_evolution(spec)?,
        FigureId::WindowLength => window_length(spec)?,
        FigureId::HighSnrUniform => high_snr_uniform(spec, &mut extra)?,
        FigureId::HighSnrPoisson => high_snr_poisson(spec, &mut extra)?,
        FigureId::LowSnrUniform => low_snr_uniform(spec)?,
        FigureId::SamplingRate => sampling_rate(spec)?,
        FigureId::WorstCasePdf => worst_case_pdf_table(spec, &mut extra)?,
        FigureId::WorstCaseCdf => worst_case_cdf_table(spec, &mut extra)?,
        FigureId::Sweep => sweep(spec)?,
    };
    let meta = TableMeta {
        spec: serde_json::to_value(spec).expect("spec serializes"),
        spec_hash: spec.hash(),
        seed: spec.seed,
        units: "nats".into(),
        extra,
    };
    DataTable::new(columns.into_iter().map(String::from).collect(), rows, meta)
}

type Table = (Vec<&'static str>, Vec<Vec<f64>>);

fn ou(g: &ParamGrid, kappa: f64) -> Result<OuParams> {
    OuParams::new(kappa, g.theta, g.sigma)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy)]
enum Sampling {
    Uniform(f64),
    Poisson(f64),
}

/// Updates generated on `[0, t_end)` and served FCFS at rate `mu`.
fn queued_timeline(sampling: Sampling, mu: f64, t_end: f64, rng: &mut SimRng) -> Result<Timeline> {
    let service = Exp::new(mu).map_err(|_| VoiError::InvalidParameter {
        name: "mu",
        value: mu,
        reason: "must be finite and > 0",
    })?;
    let unit = Exp::new(1.0).expect("unit rate");
    let mut gen = Vec::new();
    let mut serv = Vec::new();
    let mut t = 0.0;
    loop {
        // one gap draw and one service draw per update, so a change of
        // rate keeps the same underlying random numbers
        let e: f64 = rng.sample(unit);
        let w: f64 = rng.sample(service);
        t = match sampling {
            Sampling::Uniform(dt) => gen.len() as f64 * dt,
            Sampling::Poisson(rate) => t + e / rate,
        };
        if t >= t_end {
            break;
        }
        gen.push(t);
        serv.push(w.max(f64::MIN_POSITIVE));
    }
    let recv = queue_mm1::fcfs_receptions(&gen, &serv)?;
    Timeline::new(gen, recv)
}

/// Window of the latest `min(m, n)` updates received by `t`, or `None`
/// before the first reception.
fn clamped_window(tl: &Timeline, t: f64, m: usize) -> Result<Option<ObservationWindow>> {
    let n = tl.received_by(t);
    if n == 0 {
        return Ok(None);
    }
    tl.window_at(t, m.min(n)).map(Some)
}

/// Runs `f` for every replication on its own stream, in parallel, and
/// returns the per-replication vectors in replication order.
fn replicate<F>(spec: &ExperimentSpec, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    (0..spec.replications as u64).into_par_iter().map(&f).collect()
}

/// Mean over finite values, 95% half-width and the finite count.
fn stats(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN, 0);
    }
    let (mean, sd) = super::mean_sd(&v);
    let hw = if v.len() > 1 { 1.96 * sd / (v.len() as f64).sqrt() } else { f64::NAN };
    (mean, hw, v.len())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn column(reps: &[Vec<f64>], k: usize) -> impl Iterator<Item = f64> + '_ {
    reps.iter().map(move |r| r[k])
}

fn time_evolution(spec: &ExperimentSpec) -> Result<Table> {
    let g = &spec.grid;
    let p = ou(g, g.kappa[0])?;
    let noise = NoiseModel::new(g.noise_var[0])?;
    let tl = queued_timeline(Sampling::Uniform(g.dt), g.mu, g.t, &mut rng::stream(spec.seed, 0))?;
    let recv = tl.recv_times();
    let first = match recv.first() {
        Some(&r) if r <= g.t => r,
        _ => return Err(VoiError::NoUpdateReceived { t: g.t }),
    };
    let mut times: Vec<f64> = (0..)
        .map(|k| k as f64 * g.step)
        .take_while(|&s| s <= g.t)
        .filter(|&s| s > first)
        .collect();
    for (i, &r) in recv.iter().enumerate() {
        if r > g.t {
            break;
        }
        times.push(r);
        // just before the reception, if that still follows the previous one
        let before = r - 1e-6;
        if i > 0 && before > recv[i - 1] {
            times.push(before);
        }
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let cols = vec![
        "t",
        "n_received",
        "aoi",
        "markov_voi_nats",
        "voi_m1_nats",
        "voi_mn_nats",
        "correction_mn_nats",
    ];
    let rows = times
        .par_iter()
        .map(|&t| {
            let n = tl.received_by(t);
            let w1 = tl.window_at(t, 1)?;
            let wn = tl.window_at(t, n)?;
            Ok(vec![
                t,
                n as f64,
                age_of_information(&tl, t)?,
                markov_voi(&p, t - wn.last_time())?.nats(),
                voi_closed_form(&p, noise, &w1, t)?.nats(),
                voi_closed_form(&p, noise, &wn, t)?.nats(),
                correction(&p, noise, &wn, t)?.nats(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((cols, rows))
}

fn window_length(spec: &ExperimentSpec) -> Result<Table> {
    let g = &spec.grid;
    let p = ou(g, g.kappa[0])?;
    let noises: Vec<NoiseModel> = g.noise_var.iter().map(|&s| NoiseModel::new(s)).collect::<Result<_>>()?;
    // per replication: (voi, markov, ratio) for each (noise, m)
    let reps = replicate(spec, |r| {
        let tl = queued_timeline(Sampling::Uniform(g.dt), g.mu, g.t, &mut rng::stream(spec.seed, r))?;
        let mut out = Vec::with_capacity(noises.len() * g.m.len() * 3);
        for &noise in &noises {
            for &m in &g.m {
                match clamped_window(&tl, g.t, m)? {
                    Some(w) => {
                        let v = voi_closed_form(&p, noise, &w, g.t)?.nats();
                        let mk = markov_voi(&p, g.t - w.last_time())?.nats();
                        out.extend([v, mk, v / mk]);
                    }
                    None => out.extend([0.0, 0.0, f64::NAN]),
                }
            }
        }
        Ok(out)
    })?;
    let cols = vec![
        "noise_var",
        "m",
        "voi_nats",
        "markov_voi_nats",
        "normalized_voi",
        "normalized_voi_half_width",
    ];
    let mut rows = Vec::new();
    let mut k = 0;
    for &sn in &g.noise_var {
        for &m in &g.m {
            let (v, _, _) = stats(column(&reps, k));
            let (mk, _, _) = stats(column(&reps, k + 1));
            let (ratio, hw, _) = stats(column(&reps, k + 2));
            rows.push(vec![sn, m as f64, v, mk, ratio, hw]);
            k += 3;
        }
    }
    Ok((cols, rows))
}

/// Records, per κ, the grid σ_n² where a column is smallest.
fn argmin_by_kappa(rows: &[Vec<f64>], value_col: usize) -> Map<String, Value> {
    let mut best: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for r in rows {
        let key = format!("{}", r[0]);
        let v = r[value_col];
        if !v.is_finite() {
            continue;
        }
        let e = best.entry(key).or_insert((f64::INFINITY, f64::NAN));
        if v < e.0 {
            *e = (v, r[1]);
        }
    }
    best.into_iter().map(|(k, (_, sn))| (k, Value::from(sn))).collect()
}

fn high_snr_uniform(spec: &ExperimentSpec, extra: &mut Map<String, Value>) -> Result<Table> {
    let g = &spec.grid;
    let m = g.m[0];
    let ps: Vec<OuParams> = g.kappa.iter().map(|&k| ou(g, k)).collect::<Result<_>>()?;
    let noises: Vec<NoiseModel> = g.noise_var.iter().map(|&s| NoiseModel::new(s)).collect::<Result<_>>()?;
    let reps = replicate(spec, |r| {
        let tl = queued_timeline(Sampling::Uniform(g.dt), g.mu, g.t, &mut rng::stream(spec.seed, r))?;
        let w = clamped_window(&tl, g.t, m)?;
        let mut out = Vec::new();
        for p in &ps {
            for &noise in &noises {
                match &w {
                    Some(w) => {
                        let lag = g.t - w.last_time();
                        let exact = voi_closed_form(p, noise, w, g.t)?.nats();
                        let approx = voi_high_snr_uniform(p, noise, g.dt, lag).map_or(f64::NAN, |a| a.value.nats());
                        out.extend([exact, approx, markov_voi(p, lag)?.nats()]);
                    }
                    None => out.extend([0.0, f64::NAN, 0.0]),
                }
            }
        }
        Ok(out)
    })?;
    let cols = vec![
        "kappa",
        "noise_var",
        "gamma",
        "voi_exact_nats",
        "voi_exact_half_width",
        "voi_high_snr_nats",
        "markov_voi_nats",
        "in_valid_region",
        "region_bound_noise_var",
        "approx_breakdown_fraction",
    ];
    let mut rows = Vec::new();
    let mut k = 0;
    for p in &ps {
        let bound_sn = crate::approx::high_snr_turning_noise_var(p, g.dt);
        for &sn in &g.noise_var {
            let gamma = p.stationary_variance() / sn;
            let (exact, hw, _) = stats(column(&reps, k));
            let (approx, _, n_ok) = stats(column(&reps, k + 1));
            let (mk, _, _) = stats(column(&reps, k + 2));
            let breakdown = 1.0 - n_ok as f64 / reps.len() as f64;
            rows.push(vec![p.kappa(), sn, gamma, exact, hw, approx, mk, flag(sn <= bound_sn), bound_sn, breakdown]);
            k += 3;
        }
    }
    extra.insert("turning_noise_var_grid".into(), Value::Object(argmin_by_kappa(&rows, 5)));
    let analytic: Map<String, Value> = ps
        .iter()
        .map(|p| (format!("{}", p.kappa()), Value::from(crate::approx::high_snr_turning_noise_var(p, g.dt))))
        .collect();
    extra.insert("turning_noise_var_analytic".into(), Value::Object(analytic));
    Ok((cols, rows))
}

fn high_snr_poisson(spec: &ExperimentSpec, extra: &mut Map<String, Value>) -> Result<Table> {
    let g = &spec.grid;
    let m = g.m[0];
    let rate = g.rate[0];
    let ps: Vec<OuParams> = g.kappa.iter().map(|&k| ou(g, k)).collect::<Result<_>>()?;
    let noises: Vec<NoiseModel> = g.noise_var.iter().map(|&s| NoiseModel::new(s)).collect::<Result<_>>()?;
    let reps = replicate(spec, |r| {
        let tl = queued_timeline(Sampling::Poisson(rate), g.mu, g.t, &mut rng::stream(spec.seed, r))?;
        let w = clamped_window(&tl, g.t, m)?;
        let mut out = Vec::new();
        for p in &ps {
            for &noise in &noises {
                let row = match &w {
                    Some(w) => {
                        let lag = g.t - w.last_time();
                        let exact = voi_closed_form(p, noise, w, g.t)?.nats();
                        let (approx, valid) = match w.intervals().last() {
                            // a breakdown can only happen outside the valid region
                            Some(&last) => voi_high_snr_poisson(p, noise, last, lag)
                                .map_or((f64::NAN, 0.0), |a| (a.value.nats(), flag(a.in_valid_region))),
                            None => (f64::NAN, f64::NAN),
                        };
                        [exact, approx, valid, markov_voi(p, lag)?.nats()]
                    }
                    None => [0.0, f64::NAN, f64::NAN, 0.0],
                };
                out.extend(row);
            }
        }
        Ok(out)
    })?;
    let cols = vec![
        "kappa",
        "noise_var",
        "gamma",
        "voi_exact_nats",
        "voi_exact_half_width",
        "voi_high_snr_nats",
        "voi_high_snr_median_nats",
        "markov_voi_nats",
        "valid_fraction",
        "expected_region_bound_noise_var",
    ];
    let mut rows = Vec::new();
    let mut k = 0;
    for p in &ps {
        let expected_bound = crate::approx::expected_poisson_turning_noise_var(p, rate);
        for &sn in &g.noise_var {
            let gamma = p.stationary_variance() / sn;
            let (exact, hw, _) = stats(column(&reps, k));
            let (approx, _, _) = stats(column(&reps, k + 1));
            let med = median(column(&reps, k + 1).collect());
            let (valid, _, _) = stats(column(&reps, k + 2));
            let (mk, _, _) = stats(column(&reps, k + 3));
            rows.push(vec![p.kappa(), sn, gamma, exact, hw, approx, med, mk, valid, expected_bound]);
            k += 4;
        }
    }
    extra.insert("turning_noise_var_grid".into(), Value::Object(argmin_by_kappa(&rows, 5)));
    extra.insert("turning_noise_var_grid_median".into(), Value::Object(argmin_by_kappa(&rows, 6)));
    let analytic: Map<String, Value> = ps
        .iter()
        .map(|p| {
            (
                format!("{}", p.kappa()),
                Value::from(crate::approx::expected_poisson_turning_noise_var(p, rate)),
            )
        })
        .collect();
    extra.insert("turning_noise_var_expected_interval".into(), Value::Object(analytic));
    Ok((cols, rows))
}

fn low_snr_uniform(spec: &ExperimentSpec) -> Result<Table> {
    let g = &spec.grid;
    let m = g.m[0];
    let ps: Vec<OuParams> = g.kappa.iter().map(|&k| ou(g, k)).collect::<Result<_>>()?;
    let noises: Vec<NoiseModel> = g.noise_var.iter().map(|&s| NoiseModel::new(s)).collect::<Result<_>>()?;
    let reps = replicate(spec, |r| {
        let tl = queued_timeline(Sampling::Uniform(g.dt), g.mu, g.t, &mut rng::stream(spec.seed, r))?;
        let w = clamped_window(&tl, g.t, m)?;
        let mut out = Vec::new();
        for p in &ps {
            for &noise in &noises {
                match &w {
                    Some(w) => {
                        let lag = g.t - w.last_time();
                        let exact = voi_closed_form(p, noise, w, g.t)?.nats();
                        let approx = voi_low_snr_uniform(p, noise, g.dt, w.m(), lag).map_or(f64::NAN, |a| a.value.nats());
                        out.extend([exact, approx]);
                    }
                    None => out.extend([0.0, f64::NAN]),
                }
            }
        }
        Ok(out)
    })?;
    let cols = vec![
        "kappa",
        "noise_var",
        "gamma",
        "voi_exact_nats",
        "voi_exact_half_width",
        "voi_low_snr_nats",
        "in_valid_region",
        "region_bound_gamma",
    ];
    let mut rows = Vec::new();
    let mut k = 0;
    for p in &ps {
        let bound = crate::approx::low_snr_region_bound((-p.kappa() * g.dt).exp(), m);
        for &sn in &g.noise_var {
            let gamma = p.stationary_variance() / sn;
            let (exact, hw, _) = stats(column(&reps, k));
            let (approx, _, _) = stats(column(&reps, k + 1));
            rows.push(vec![p.kappa(), sn, gamma, exact, hw, approx, flag(gamma <= bound), bound]);
            k += 2;
        }
    }
    Ok((cols, rows))
}

fn sampling_rate(spec: &ExperimentSpec) -> Result<Table> {
    let g = &spec.grid;
    let m = g.m[0];
    let noise = NoiseModel::new(g.noise_var[0])?;
    let ps: Vec<OuParams> = g.kappa.iter().map(|&k| ou(g, k)).collect::<Result<_>>()?;
    // (voi, markov, aoi, no-update) per (rate, kappa)
    let reps = replicate(spec, |r| {
        let mut out = Vec::new();
        for &rate in &g.rate {
            // fresh copy of the replication stream: common random numbers across rates
            let tl = queued_timeline(Sampling::Poisson(rate), g.mu, g.t, &mut rng::stream(spec.seed, r))?;
            let w = clamped_window(&tl, g.t, m)?;
            for p in &ps {
                match &w {
                    Some(w) => {
                        let lag = g.t - w.last_time();
                        out.extend([
                            voi_closed_form(p, noise, w, g.t)?.nats(),
                            markov_voi(p, lag)?.nats(),
                            lag,
                            0.0,
                        ]);
                    }
                    None => out.extend([0.0, 0.0, f64::NAN, 1.0]),
                }
            }
        }
        Ok(out)
    })?;
    let cols = vec![
        "kappa",
        "rate",
        "voi_nats",
        "voi_half_width",
        "markov_voi_nats",
        "aoi",
        "no_update_fraction",
    ];
    let mut rows = Vec::new();
    for (ri, &rate) in g.rate.iter().enumerate() {
        for (pi, p) in ps.iter().enumerate() {
            let k = (ri * ps.len() + pi) * 4;
            let (v, hw, _) = stats(column(&reps, k));
            let (mk, _, _) = stats(column(&reps, k + 1));
            let (aoi, _, _) = stats(column(&reps, k + 2));
            let (none, _, _) = stats(column(&reps, k + 3));
            rows.push(vec![p.kappa(), rate, v, hw, mk, aoi, none]);
        }
    }
    // rows keyed by κ first
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok((cols, rows))
}

/// Closed-form CDF with the support endpoints filled in.
fn cdf_at(v: f64, q: &Mm1Params, p: &OuParams, gamma: f64, upper: f64) -> Result<f64> {
    if v <= 0.0 {
        Ok(0.0)
    } else if v >= upper {
        Ok(1.0)
    } else {
        queue_mm1::worst_case_cdf(v, q, p, gamma)
    }
}

fn worst_case_pdf_table(spec: &ExperimentSpec, extra: &mut Map<String, Value>) -> Result<Table> {
    let g = &spec.grid;
    let p = ou(g, g.kappa[0])?;
    let q = Mm1Params::new(g.rate[0], g.mu)?;
    let gamma = p.stationary_variance() / NoiseModel::new(g.noise_var[0])?.variance();
    let upper = queue_mm1::support_max(gamma)?;
    let bins = g.bins;
    let width = upper / bins as f64;
    let samples = if spec.samples > 0 {
        queue_mm1::worst_case_samples(&q, &p, gamma, spec.samples, spec.thin, &mut rng::stream(spec.seed, 0))?
    } else {
        Vec::new()
    };
    let mut counts = vec![0usize; bins];
    for &v in &samples {
        counts[((v / width) as usize).min(bins - 1)] += 1;
    }
    let n = samples.len() as f64;
    let cols = vec![
        "v_nats",
        "v_lo_nats",
        "v_hi_nats",
        "pdf_per_nat",
        "cdf",
        "bin_prob",
        "hist_density_per_nat",
        "ecdf",
        "bin_z",
    ];
    let mut rows = Vec::with_capacity(bins);
    let mut cum = 0usize;
    let mut max_z = 0.0f64;
    for (b, &count) in counts.iter().enumerate() {
        let lo = b as f64 * width;
        let hi = if b + 1 == bins { upper } else { (b + 1) as f64 * width };
        let mid = 0.5 * (lo + hi);
        let prob = cdf_at(hi, &q, &p, gamma, upper)? - cdf_at(lo, &q, &p, gamma, upper)?;
        cum += count;
        let (hist, ecdf, z) = if n > 0.0 {
            let se = (n * prob * (1.0 - prob)).sqrt();
            let z = (count as f64 - n * prob) / se;
            max_z = max_z.max(z.abs());
            (count as f64 / (n * (hi - lo)), cum as f64 / n, z)
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        rows.push(vec![
            mid,
            lo,
            hi,
            queue_mm1::worst_case_pdf(mid, &q, &p, gamma)?,
            cdf_at(hi, &q, &p, gamma, upper)?,
            prob,
            hist,
            ecdf,
            z,
        ]);
    }
    if n > 0.0 {
        let ks = ks_distance(&samples, |v| cdf_at(v, &q, &p, gamma, upper).unwrap_or(f64::NAN));
        extra.insert("ks_distance".into(), Value::from(ks));
        extra.insert("max_abs_bin_z".into(), Value::from(max_z));
    }
    extra.insert("samples".into(), Value::from(samples.len()));
    extra.insert("support_max_nats".into(), Value::from(upper));
    Ok((cols, rows))
}

fn worst_case_cdf_table(spec: &ExperimentSpec, extra: &mut Map<String, Value>) -> Result<Table> {
    let g = &spec.grid;
    let q = Mm1Params::new(g.rate[0], g.mu)?;
    let mut combos = Vec::new();
    for &k in &g.kappa {
        for &sn in &g.noise_var {
            let p = ou(g, k)?;
            let gamma = p.stationary_variance() / NoiseModel::new(sn)?.variance();
            combos.push((p, sn, gamma, queue_mm1::support_max(gamma)?));
        }
    }
    let v_max = combos.iter().map(|c| c.3).fold(0.0, f64::max);
    let grid: Vec<f64> = (1..=g.bins).map(|k| v_max * k as f64 / g.bins as f64).collect();
    let per_combo = combos
        .par_iter()
        .enumerate()
        .map(|(i, (p, _, gamma, upper))| {
            let mut samples = if spec.samples > 0 {
                queue_mm1::worst_case_samples(&q, p, *gamma, spec.samples, spec.thin, &mut rng::stream(spec.seed, i as u64))?
            } else {
                Vec::new()
            };
            samples.sort_by(f64::total_cmp);
            let ks = if samples.is_empty() {
                f64::NAN
            } else {
                ks_distance(&samples, |v| cdf_at(v, &q, p, *gamma, *upper).unwrap_or(f64::NAN))
            };
            let rows = grid
                .iter()
                .map(|&v| {
                    let ecdf = if samples.is_empty() {
                        f64::NAN
                    } else {
                        samples.partition_point(|&s| s <= v) as f64 / samples.len() as f64
                    };
                    Ok((cdf_at(v, &q, p, *gamma, *upper)?, ecdf))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((rows, ks))
        })
        .collect::<Result<Vec<_>>>()?;
    let cols = vec!["kappa", "noise_var", "v_nats", "cdf", "ecdf"];
    let mut rows = Vec::new();
    let mut ks_map = Map::new();
    for ((p, sn, _, _), (vals, ks)) in combos.iter().zip(per_combo) {
        for (&v, (c, e)) in grid.iter().zip(vals) {
            rows.push(vec![p.kappa(), *sn, v, c, e]);
        }
        ks_map.insert(format!("kappa={},noise_var={}", p.kappa(), sn), Value::from(ks));
    }
    if spec.samples > 0 {
        extra.insert("ks_distance".into(), Value::Object(ks_map));
    }
    extra.insert("samples_per_curve".into(), Value::from(spec.samples));
    Ok((cols, rows))
}

fn sweep(spec: &ExperimentSpec) -> Result<Table> {
    let g = &spec.grid;
    let mut points = Vec::new();
    for &k in &g.kappa {
        for &sn in &g.noise_var {
            for &m in &g.m {
                for &lag in &g.lag {
                    points.push((k, sn, m, lag));
                }
            }
        }
    }
    let cols = vec![
        "kappa",
        "noise_var",
        "dt",
        "m",
        "lag",
        "gamma",
        "voi_exact_nats",
        "markov_voi_nats",
        "correction_nats",
        "voi_high_snr_nats",
        "high_snr_valid",
        "voi_low_snr_nats",
        "low_snr_valid",
        "empirical_mi_nats",
        "empirical_mi_half_width",
        "ok",
    ];
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, &(k, sn, m, lag))| {
            let mut row = vec![k, sn, g.dt, m as f64, lag];
            match sweep_point(spec, i as u64, k, sn, m, lag) {
                Ok(vals) => {
                    row.extend(vals);
                    row.push(1.0);
                }
                Err(_) => {
                    row.extend([f64::NAN; 10]);
                    row.push(0.0);
                }
            }
            row
        })
        .collect();
    Ok((cols, rows))
}

fn sweep_point(spec: &ExperimentSpec, index: u64, kappa: f64, sn: f64, m: usize, lag: f64) -> Result<Vec<f64>> {
    let g = &spec.grid;
    let p = ou(g, kappa)?;
    let noise = NoiseModel::new(sn)?;
    let w = ObservationWindow::uniform(g.dt, m, 0.0)?;
    let gamma = if noise.is_noiseless() { f64::INFINITY } else { p.stationary_variance() / sn };
    let exact = voi_closed_form(&p, noise, &w, lag)?.nats();
    let (hs, hs_ok) = match voi_high_snr_uniform(&p, noise, g.dt, lag) {
        Ok(a) if m >= 2 || noise.is_noiseless() => (a.value.nats(), flag(a.in_valid_region)),
        _ => (f64::NAN, f64::NAN),
    };
    let (ls, ls_ok) = voi_low_snr_uniform(&p, noise, g.dt, m, lag)
        .map_or((f64::NAN, f64::NAN), |a| (a.value.nats(), flag(a.in_valid_region)));
    let (emp, hw) = if spec.samples > 0 {
        let est: Vec<f64> = (0..spec.replications as u64)
            .map(|r| {
                let mut rng = rng::stream(spec.seed, index * spec.replications as u64 + r);
                let s = sample_windows(&p, noise, &w, lag, spec.samples, &mut rng)?;
                Ok(empirical_gaussian_mi(&s)?.nats())
            })
            .collect::<Result<_>>()?;
        let (mean, hw, _) = stats(est.into_iter());
        (mean, hw)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(vec![
        gamma,
        exact,
        markov_voi(&p, lag)?.nats(),
        correction(&p, noise, &w, lag)?.nats(),
        hs,
        hs_ok,
        ls,
        ls_ok,
        emp,
        hw,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(figure: FigureId) -> ExperimentSpec {
        let mut s = defaults_for(figure, 9);
        s.replications = s.replications.min(20);
        s.samples = s.samples.min(20_000);
        s
    }

    #[test]
    fn figure_keys_round_trip() {
        for f in FigureId::ALL {
            assert_eq!(f.key().parse::<FigureId>().unwrap(), f);
        }
        assert!("9".parse::<FigureId>().is_err());
    }

    #[test]
    fn hash_tracks_spec() {
        let a = defaults_for(FigureId::WindowLength, 1);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation() {
        let mut s = defaults_for(FigureId::Sweep, 1);
        s.replications = 0;
        assert!(run_experiment(&s).is_err());
        let mut s = defaults_for(FigureId::SamplingRate, 1);
        s.grid.rate.push(1.0);
        assert!(matches!(run_experiment(&s), Err(VoiError::UnstableQueue { .. })));
        let mut s = defaults_for(FigureId::Sweep, 1);
        s.grid.kappa.clear();
        assert!(run_experiment(&s).is_err());
    }

    #[test]
    fn every_figure_runs_and_embeds_spec() {
        for f in FigureId::ALL {
            let spec = small(f);
            let t = run_experiment(&spec).unwrap();
            assert!(!t.rows().is_empty(), "{f}");
            assert_eq!(t.meta.spec_hash, spec.hash());
            assert_eq!(t.meta.seed, 9);
            let back: ExperimentSpec = serde_json::from_value(t.meta.spec.clone()).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn queued_timeline_uses_fcfs() {
        let tl = queued_timeline(Sampling::Uniform(2.0), 1.0, 50.0, &mut rng::seeded(1)).unwrap();
        assert_eq!(tl.len(), 25);
        for i in 1..tl.len() {
            assert!(tl.recv_times()[i] >= tl.recv_times()[i - 1]);
        }
    }

    #[test]
    fn sweep_flags_infeasible_rows() {
        let mut s = defaults_for(FigureId::Sweep, 1);
        s.grid.lag = vec![1.0];
        s.grid.noise_var = vec![0.0, 0.5];
        let t = run_experiment(&s).unwrap();
        let ok = t.column("ok").unwrap();
        assert!(ok.iter().all(|&v| v == 1.0));
        // noiseless rows have no low-SNR value
        let ls = t.column("voi_low_snr_nats").unwrap();
        let sn = t.column("noise_var").unwrap();
        for (l, s) in ls.iter().zip(&sn) {
            assert_eq!(l.is_nan(), *s == 0.0);
        }
    }

    #[test]
    fn sweep_empirical_columns() {
        let mut s = defaults_for(FigureId::Sweep, 4);
        s.grid.m = vec![1];
        s.grid.noise_var = vec![1.0];
        s.grid.lag = vec![2.0];
        s.replications = 5;
        s.samples = 20_000;
        let t = run_experiment(&s).unwrap();
        let exact = t.column("voi_exact_nats").unwrap()[0];
        let emp = t.column("empirical_mi_nats").unwrap()[0];
        let hw = t.column("empirical_mi_half_width").unwrap()[0];
        assert!((emp - exact).abs() < 0.03, "{emp} vs {exact}");
        assert!(hw > 0.0);
    }
}
