//! Subcommand implementations.

use serde_json::json;
use voi_core::approx::{voi_high_snr_poisson, voi_high_snr_uniform, voi_low_snr_uniform, ApproxResult};
use voi_core::montecarlo::{defaults_for, run_experiment, DataTable, ExperimentSpec, FigureId, TableMeta};
use voi_core::voi_exact::{correction, markov_voi, snr_ratio};
use voi_core::window::poisson_timeline;
use voi_core::{voi_closed_form, Mm1Params, NoiseModel, ObservationWindow, OuParams};

use crate::output::{emit, resolve_seed};
use crate::{ApproxArgs, Failure, FigArgs, GridArgs, Mm1Args, SweepArgs, VoiArgs};

fn positive(flag: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Failure::usage(flag, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(flag: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Failure::usage(flag, format!("must be finite and >= 0, got {v}")))
    }
}

fn at_least_one(flag: &str, v: usize) -> Result<usize, Failure> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(Failure::usage(flag, "must be at least 1"))
    }
}

fn ou(kappa: f64, theta: f64, sigma: f64) -> Result<OuParams, Failure> {
    positive("kappa", kappa)?;
    positive("sigma", sigma)?;
    if !theta.is_finite() {
        return Err(Failure::usage("theta", "must be finite"));
    }
    Ok(OuParams::new(kappa, theta, sigma)?)
}

/// Value, validity flag and region bound; NaN value when the truncated
/// series breaks down.
fn approx_cells(r: voi_core::Result<ApproxResult>) -> Result<[f64; 3], Failure> {
    match r {
        Ok(a) => Ok([a.value.nats(), f64::from(u8::from(a.in_valid_region)), a.region_bound]),
        Err(voi_core::VoiError::ApproximationBreakdown { .. }) => Ok([f64::NAN, 0.0, f64::NAN]),
        Err(e) => Err(e.into()),
    }
}

pub fn voi(a: &VoiArgs) -> Result<(), Failure> {
    let p = ou(a.kappa, a.theta, a.sigma)?;
    let noise = NoiseModel::new(non_negative("noise-var", a.noise_var)?)?;
    let m = at_least_one("m", a.m)?;
    if let Some(lag) = a.lag {
        positive("lag", lag)?;
    }
    let (times, seed) = match a.rate {
        Some(rate) => {
            positive("rate", rate)?;
            let seed = resolve_seed(&a.output);
            (poisson_timeline(rate, m, seed)?, seed)
        }
        None => {
            let dt = positive("dt", a.dt)?;
            ((0..m).map(|i| i as f64 * dt).collect(), a.output.seed.unwrap_or(0))
        }
    };
    let w = ObservationWindow::from_gen_times(times)?;
    let t_n = w.last_time();
    let (t, lag) = match (a.t, a.lag) {
        (Some(t), _) => {
            if !(t.is_finite() && t > t_n) {
                return Err(Failure::usage("t", format!("query time must be after the last observation at {t_n}")));
            }
            (t, t - t_n)
        }
        (None, Some(lag)) => (t_n + lag, lag),
        (None, None) => return Err(Failure::usage("lag", "either --lag or --t is required")),
    };

    let gamma = snr_ratio(&p, noise).finite().unwrap_or(f64::INFINITY);
    let mut columns = vec!["m", "t_n", "lag", "gamma", "voi_nats", "markov_nats", "correction_nats"];
    let mut row = vec![
        m as f64,
        t_n,
        lag,
        gamma,
        voi_closed_form(&p, noise, &w, t)?.nats(),
        markov_voi(&p, lag)?.nats(),
        correction(&p, noise, &w, t)?.nats(),
    ];
    let mut spec = json!({
        "command": "voi",
        "kappa": a.kappa, "theta": a.theta, "sigma": a.sigma, "noise_var": a.noise_var,
        "m": m, "dt": a.dt, "rate": a.rate, "lag": lag, "gen_times": w.gen_times(),
    });
    if a.approx {
        // High-SNR expansions are used from γ = 1 up; a single uniform sample
        // has no separate high-SNR form, so it always takes the low-SNR one.
        let high = a.rate.is_some() || (gamma >= 1.0 && m >= 2);
        let cells = if let Some(_rate) = a.rate {
            let last = w.intervals().last().copied().unwrap_or(t_n);
            approx_cells(voi_high_snr_poisson(&p, noise, last, lag))?
        } else if high {
            approx_cells(voi_high_snr_uniform(&p, noise, a.dt, lag))?
        } else if noise.is_noiseless() {
            [markov_voi(&p, lag)?.nats(), 1.0, f64::NAN]
        } else {
            approx_cells(voi_low_snr_uniform(&p, noise, a.dt, m, lag))?
        };
        columns.extend(["approx_high_snr", "approx_nats", "approx_valid", "approx_region_bound_gamma"]);
        row.push(f64::from(u8::from(high)));
        row.extend(cells);
        spec["approx"] = json!(true);
    }
    let table = DataTable::new(
        columns.into_iter().map(String::from).collect(),
        vec![row],
        TableMeta::for_spec(spec, seed),
    )?;
    emit(&table, &a.output)
}

pub fn approx(a: &ApproxArgs) -> Result<(), Failure> {
    let p = ou(a.kappa, a.theta, a.sigma)?;
    let m = at_least_one("m", a.m)?;
    let dt = positive("dt", a.dt)?;
    let lag = positive("lag", a.lag)?;
    if a.noise_var.is_empty() {
        return Err(Failure::usage("noise-var", "needs at least one value"));
    }
    let w = ObservationWindow::uniform(dt, m, 0.0)?;
    let mut rows = Vec::with_capacity(a.noise_var.len());
    for &nv in &a.noise_var {
        let noise = NoiseModel::new(positive("noise-var", nv)?)?;
        let gamma = snr_ratio(&p, noise).finite().unwrap_or(f64::INFINITY);
        let exact = voi_closed_form(&p, noise, &w, lag)?.nats();
        let high = approx_cells(voi_high_snr_uniform(&p, noise, dt, lag))?;
        let low = approx_cells(voi_low_snr_uniform(&p, noise, dt, m, lag))?;
        rows.push(vec![nv, gamma, exact, high[0], high[1], high[2], low[0], low[1], low[2]]);
    }
    let columns = [
        "noise_var",
        "gamma",
        "exact_nats",
        "high_snr_nats",
        "high_snr_valid",
        "high_snr_min_gamma",
        "low_snr_nats",
        "low_snr_valid",
        "low_snr_max_gamma",
    ];
    let spec = json!({
        "command": "approx",
        "kappa": a.kappa, "theta": a.theta, "sigma": a.sigma, "noise_var": a.noise_var,
        "m": m, "dt": dt, "lag": lag,
    });
    let table = DataTable::new(
        columns.into_iter().map(String::from).collect(),
        rows,
        TableMeta::for_spec(spec, a.output.seed.unwrap_or(0)),
    )?;
    emit(&table, &a.output)
}

fn apply_grid(spec: &mut ExperimentSpec, g: &GridArgs) {
    let grid = &mut spec.grid;
    if let Some(v) = &g.kappa {
        grid.kappa = v.clone();
    }
    if let Some(v) = g.theta {
        grid.theta = v;
    }
    if let Some(v) = g.sigma {
        grid.sigma = v;
    }
    if let Some(v) = &g.noise_var {
        grid.noise_var = v.clone();
    }
    if let Some(v) = g.dt {
        grid.dt = v;
    }
    if let Some(v) = &g.rate {
        grid.rate = v.clone();
    }
    if let Some(v) = g.mu {
        grid.mu = v;
    }
    if let Some(v) = &g.m {
        grid.m = v.clone();
    }
    if let Some(v) = g.t {
        grid.t = v;
    }
    if let Some(v) = &g.lag {
        grid.lag = v.clone();
    }
    if let Some(v) = g.bins {
        grid.bins = v;
    }
    if let Some(v) = g.samples {
        spec.samples = v;
    }
    if let Some(v) = g.replications {
        spec.replications = v;
    }
    if let Some(v) = g.thin {
        spec.thin = v;
    }
}

pub fn fig(a: &FigArgs) -> Result<(), Failure> {
    let figure: FigureId = a.figure.parse().map_err(|e: String| Failure { code: 2, message: e })?;
    let mut spec = defaults_for(figure, resolve_seed(&a.output));
    apply_grid(&mut spec, &a.grid);
    emit(&run_experiment(&spec)?, &a.output)
}

pub fn sweep(a: &SweepArgs) -> Result<(), Failure> {
    let mut spec = defaults_for(FigureId::Sweep, resolve_seed(&a.output));
    apply_grid(&mut spec, &a.grid);
    emit(&run_experiment(&spec)?, &a.output)
}

pub fn mm1(a: &Mm1Args) -> Result<(), Failure> {
    ou(a.kappa, 0.0, a.sigma)?;
    positive("noise-var", a.noise_var)?;
    positive("rate", a.rate)?;
    positive("mu", a.mu)?;
    Mm1Params::new(a.rate, a.mu)?;
    at_least_one("bins", a.bins)?;
    at_least_one("thin", a.thin)?;
    let mut spec = defaults_for(FigureId::WorstCasePdf, resolve_seed(&a.output));
    spec.grid.kappa = vec![a.kappa];
    spec.grid.sigma = a.sigma;
    spec.grid.noise_var = vec![a.noise_var];
    spec.grid.rate = vec![a.rate];
    spec.grid.mu = a.mu;
    spec.grid.bins = a.bins;
    spec.samples = a.samples;
    spec.thin = a.thin;
    emit(&run_experiment(&spec)?, &a.output)
}
