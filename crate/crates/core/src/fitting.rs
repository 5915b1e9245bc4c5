//! Weighted creep error and Nelder–Mead parameter estimation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::material::MaterialParams;
use crate::uniaxial::{simulate_creep, CreepOptions, CreepSegment, CreepSolution};

/// Objective value reported when a simulation fails.
pub const PENALTY: f64 = 1e6;
pub const DEFAULT_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("invalid fit configuration: {0}")]
    Config(String),
}

/// Creep test record: strain samples during loading and after unloading.
/// Times are absolute, measured from load application.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentalDataset {
    pub load: Vec<(f64, f64)>,
    pub unload: Vec<(f64, f64)>,
    /// Pa
    pub stress: f64,
    pub temperature_c: Option<f64>,
    pub provenance: String,
    /// Unloading instant; defaults to the first unload time stamp.
    pub unload_start: Option<f64>,
}

fn check_phase(name: &str, pts: &[(f64, f64)]) -> Result<(), FitError> {
    if pts.iter().any(|(t, e)| !t.is_finite() || !e.is_finite()) {
        return Err(FitError::Dataset(format!(
            "non-finite value in {name} phase"
        )));
    }
    if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(FitError::Dataset(format!(
            "{name} times are not strictly increasing"
        )));
    }
    Ok(())
}

impl ExperimentalDataset {
    pub fn new(
        stress: f64,
        load: Vec<(f64, f64)>,
        unload: Vec<(f64, f64)>,
    ) -> Result<Self, FitError> {
        let ds = Self {
            load,
            unload,
            stress,
            ..Self::default()
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if !self.stress.is_finite() {
            return Err(FitError::Dataset("stress is not finite".into()));
        }
        if self.load.len() < 2 {
            return Err(FitError::Dataset(
                "load phase needs at least 2 points".into(),
            ));
        }
        check_phase("load", &self.load)?;
        check_phase("unload", &self.unload)?;
        if self.load[0].0 < 0.0 {
            return Err(FitError::Dataset("load times must be non-negative".into()));
        }
        let last_load = self.load[self.load.len() - 1].0;
        if let Some(tu) = self.unload_start {
            if !(tu >= last_load) {
                return Err(FitError::Dataset(format!(
                    "unload start {tu} precedes the last load time {last_load}"
                )));
            }
            if self.unload.first().is_some_and(|&(t, _)| t < tu) {
                return Err(FitError::Dataset(
                    "unload sample before the unload start".into(),
                ));
            }
        }
        if let Some(&(t, _)) = self.unload.first() {
            if !(t >= last_load) {
                return Err(FitError::Dataset(format!(
                    "unload time {t} precedes the last load time {last_load}"
                )));
            }
        }
        if self.load_duration() <= 0.0 {
            return Err(FitError::Dataset("load phase has zero duration".into()));
        }
        Ok(())
    }

    pub fn has_unload(&self) -> bool {
        !self.unload.is_empty()
    }

    /// `t_u`, or the last load time when there is no unloading.
    pub fn load_duration(&self) -> f64 {
        let first_unload = self.unload.iter().map(|p| p.0).reduce(f64::min);
        let last_load = self
            .load
            .iter()
            .map(|p| p.0)
            .fold(f64::NEG_INFINITY, f64::max);
        self.unload_start.or(first_unload).unwrap_or(last_load)
    }

    /// Load to `stress` until `t_u`, then zero stress until the last sample.
    pub fn program(&self) -> Vec<CreepSegment> {
        let tu = self.load_duration();
        let mut segs = vec![CreepSegment {
            stress: self.stress,
            duration: tu,
        }];
        if let Some(t_last) = self.unload.iter().map(|p| p.0).reduce(f64::max) {
            if t_last > tu {
                segs.push(CreepSegment {
                    stress: 0.0,
                    duration: t_last - tu,
                });
            }
        }
        segs
    }
}

/// `sqrt(Σ(ε_theo − ε_exp)² / Σ ε_exp²)` over one phase.
fn phase_error(pts: &[(f64, f64)], theo: impl Fn(f64) -> Option<f64>) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, e) in pts {
        let d = theo(t)? - e;
        num += d * d;
        den += e * e;
    }
    Some(if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    })
}

/// Weighted relative creep error of a simulation against `ds`. Simulation
/// failures give [`PENALTY`].
pub fn creep_error(
    mp: &MaterialParams,
    ds: &ExperimentalDataset,
    w: f64,
    opts: &CreepOptions,
) -> f64 {
    match simulate_creep(&ds.program(), mp, opts) {
        Ok(sol) => creep_error_of(&sol, ds, w),
        Err(e) => {
            log::debug!("creep simulation failed: {e}");
            PENALTY
        }
    }
}

/// [`creep_error`] for an already computed solution of `ds.program()`.
pub fn creep_error_of(sol: &CreepSolution, ds: &ExperimentalDataset, w: f64) -> f64 {
    let load = phase_error(&ds.load, |t| sol.strain_in_segment(0, t));
    let (w, unload) = if ds.has_unload() && sol.segments.len() > 1 {
        let tu = sol.segments[1].start;
        let un = phase_error(&ds.unload, |t| {
            // samples stamped exactly at t_u belong to the unloaded state
            sol.strain_in_segment(1, t.max(tu))
        });
        (w, un)
    } else {
        (1.0, Some(0.0))
    };
    match (load, unload) {
        (Some(l), Some(u)) if (w * l + (1.0 - w) * u).is_finite() => w * l + (1.0 - w) * u,
        _ => PENALTY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    pub max_iterations: usize,
    /// Simplex diameter relative to `max(1, ‖x_best‖∞)`.
    pub x_tolerance: f64,
    /// `f_worst − f_best`.
    pub f_tolerance: f64,
    /// Stop as soon as the best value reaches this.
    pub f_target: f64,
    /// Initial edge length relative to `|x0_i|` (absolute when `x0_i = 0`).
    pub initial_step: f64,
    pub execution: Execution,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            x_tolerance: 1e-8,
            f_tolerance: 1e-12,
            f_target: f64::NEG_INFINITY,
            initial_step: 0.05,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Minimizes `f` from `x0` with the standard simplex coefficients.
pub fn nelder_mead<F>(f: F, x0: &[f64], cfg: &NelderMeadConfig) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let n = x0.len();
    let eval = |x: &Vec<f64>| finite_or_inf(f(x));
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if x0[i] != 0.0 {
            cfg.initial_step * x0[i].abs()
        } else {
            cfg.initial_step
        };
        simplex.push(v);
    }
    let mut values = cfg.execution.map(&simplex, eval);
    let mut evaluations = n + 1;
    let mut iterations = 0;
    let mut converged = false;

    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
    };

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = &simplex[0];
        let scale = best.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(best)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .fold(0.0, f64::max);
        if values[0] <= cfg.f_target
            || (diameter / scale < cfg.x_tolerance && values[n] - values[0] < cfg.f_tolerance)
        {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let reflected = combine(&centroid, &simplex[n], -REFLECT);
        let fr = eval(&reflected);
        evaluations += 1;
        if fr < values[0] {
            let expanded = combine(&centroid, &simplex[n], -EXPAND);
            let fe = eval(&expanded);
            evaluations += 1;
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (candidate, fc) = if fr < values[n] {
            let c = combine(&centroid, &reflected, CONTRACT);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = combine(&centroid, &simplex[n], CONTRACT);
            let fc = eval(&c);
            (c, fc)
        };
        evaluations += 1;
        if fc < values[n].min(fr) {
            simplex[n] = candidate;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        let shrunk: Vec<Vec<f64>> = simplex[1..]
            .iter()
            .map(|v| combine(&best, v, SHRINK))
            .collect();
        let fs = cfg.execution.map(&shrunk, eval);
        evaluations += n;
        for (i, (v, fv)) in shrunk.into_iter().zip(fs).enumerate() {
            simplex[i + 1] = v;
            values[i + 1] = fv;
        }
    }

    NelderMeadResult {
        x: simplex[0].clone(),
        f: values[0],
        iterations,
        evaluations,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub weight: f64,
    pub initial: MaterialParams,
    pub simplex: NelderMeadConfig,
    /// Fresh simplices started from the best point after convergence.
    pub restarts: usize,
    pub creep: CreepOptions,
}

impl FitConfig {
    pub fn new(initial: MaterialParams) -> Self {
        Self {
            weight: DEFAULT_WEIGHT,
            initial,
            simplex: NelderMeadConfig {
                f_target: 1e-12,
                ..NelderMeadConfig::default()
            },
            restarts: 2,
            creep: CreepOptions::default(),
        }
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.weight = w;
        self
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(FitError::Config(format!(
                "weight {} outside [0, 1]",
                self.weight
            )));
        }
        let p = &self.initial;
        if [p.mu_p_bar, p.mu_g_bar, p.eta]
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(FitError::Config(
                "initial guess must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Fitted parameters; serializes to the flat result JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mu_p_bar: f64,
    pub mu_g_bar: f64,
    pub eta: f64,
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub w: f64,
}

impl FitResult {
    pub fn params(&self) -> MaterialParams {
        MaterialParams {
            mu_p_bar: self.mu_p_bar,
            mu_g_bar: self.mu_g_bar,
            eta: self.eta,
            thermal: None,
        }
    }
}

/// Rough starting point read off the load curve: instantaneous compliance,
/// creep gap, and time to close 63.2% of it.
pub fn initial_guess(ds: &ExperimentalDataset) -> Result<MaterialParams, FitError> {
    ds.validate()?;
    let t = ds.stress;
    let e0 = ds.load[0].1;
    let e_end = ds.load[ds.load.len() - 1].1;
    if !(t != 0.0 && e0 * t > 0.0) {
        return Err(FitError::Dataset(
            "cannot estimate moduli from this load curve".into(),
        ));
    }
    let mu_p = t / (3.0 * e0);
    let gap = (e_end - e0).abs().max(1e-3 * e0.abs());
    let mu_g = t.abs() / (3.0 * gap);
    let target = e0 + (1.0 - (-1.0f64).exp()) * (e_end - e0);
    let tau = ds
        .load
        .windows(2)
        .find(|w| (w[0].1 - target) * (w[1].1 - target) <= 0.0 && w[1].1 != w[0].1)
        .map(|w| w[0].0 + (target - w[0].1) * (w[1].0 - w[0].0) / (w[1].1 - w[0].1))
        .filter(|&tau| tau > 0.0)
        .unwrap_or(ds.load_duration() / 3.0);
    MaterialParams::new(mu_p.abs(), mu_g, 2.0 * mu_g * tau)
        .map_err(|e| FitError::Dataset(e.to_string()))
}

fn params_from_log(x: &[f64]) -> Option<MaterialParams> {
    MaterialParams::new(x[0].exp(), x[1].exp(), x[2].exp()).ok()
}

/// Minimizes [`creep_error`] over `(ln μ̄_p, ln μ̄_G, ln η)`.
pub fn fit_dataset(ds: &ExperimentalDataset, cfg: &FitConfig) -> Result<FitResult, FitError> {
    ds.validate()?;
    cfg.validate()?;
    let w = if ds.has_unload() { cfg.weight } else { 1.0 };
    let objective = |x: &[f64]| match params_from_log(x) {
        Some(mp) => creep_error(&mp, ds, w, &cfg.creep),
        None => PENALTY,
    };
    let p = &cfg.initial;
    let mut x = vec![p.mu_p_bar.ln(), p.mu_g_bar.ln(), p.eta.ln()];
    let mut iterations = 0;
    let mut best = f64::INFINITY;
    let mut converged = false;
    for round in 0..=cfg.restarts {
        let r = nelder_mead(objective, &x, &cfg.simplex);
        iterations += r.iterations;
        converged = r.converged;
        log::debug!(
            "simplex round {round}: f = {:e} after {} iterations",
            r.f,
            r.iterations
        );
        let improved = r.f < best;
        if improved {
            x = r.x;
        }
        let gain = best - r.f;
        best = best.min(r.f);
        if !r.converged
            || best <= cfg.simplex.f_target
            || (round > 0 && gain <= cfg.simplex.f_tolerance)
        {
            break;
        }
    }
    let mp =
        params_from_log(&x).ok_or_else(|| FitError::Config("fit left the valid range".into()))?;
    Ok(FitResult {
        mu_p_bar: mp.mu_p_bar,
        mu_g_bar: mp.mu_g_bar,
        eta: mp.eta,
        error: best,
        iterations,
        converged,
        w,
    })
}

/// Fits several datasets with the same configuration.
pub fn fit_many(
    datasets: &[ExperimentalDataset],
    cfg: &FitConfig,
    exec: Execution,
) -> Vec<Result<FitResult, FitError>> {
    exec.map(datasets, |ds| fit_dataset(ds, cfg))
}

/// Prediction error of fitted parameters on a held-out dataset.
pub fn holdout_error(
    fit: &FitResult,
    ds: &ExperimentalDataset,
    opts: &CreepOptions,
) -> Result<f64, FitError> {
    ds.validate()?;
    let w = if ds.has_unload() { fit.w } else { 1.0 };
    Ok(creep_error(&fit.params(), ds, w, opts))
}
