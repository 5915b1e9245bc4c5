//! Dormand–Prince 5(4) explicit Runge–Kutta integrator with PI step-size
//! control and the pair's quartic dense output.

use thiserror::Error;

/// Default relative tolerance.
pub const DEFAULT_RTOL: f64 = 1e-8;
/// Default absolute tolerance.
pub const DEFAULT_ATOL: f64 = 1e-10;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense output
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Right-hand side `f(t, y) → dy`; an `Err` aborts the current trial step.
pub type Rhs<'a> = Box<dyn FnMut(f64, &[f64], &mut [f64]) -> Result<(), String> + 'a>;
/// In-place correction applied to each accepted state.
pub type Projection<'a> = Box<dyn FnMut(&mut [f64]) + 'a>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            initial_step: None,
            max_step: None,
            max_steps: 1_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_atol(mut self, atol: f64) -> Self {
        self.atol = atol;
        self
    }
}

/// An initial-value problem `y' = f(t, y)`, `y(t₀) = y₀` on `[t₀, t₁]`.
pub struct OdeProblem<'a> {
    rhs: Rhs<'a>,
    span: (f64, f64),
    y0: Vec<f64>,
    options: OdeOptions,
    projection: Option<Projection<'a>>,
}

impl<'a> OdeProblem<'a> {
    pub fn new(
        rhs: impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), String> + 'a,
        span: (f64, f64),
        y0: Vec<f64>,
    ) -> Self {
        Self {
            rhs: Box::new(rhs),
            span,
            y0,
            options: OdeOptions::default(),
            projection: None,
        }
    }

    pub fn options(mut self, options: OdeOptions) -> Self {
        self.options = options;
        self
    }

    pub fn rtol(mut self, rtol: f64) -> Self {
        self.options.rtol = rtol;
        self
    }

    pub fn atol(mut self, atol: f64) -> Self {
        self.options.atol = atol;
        self
    }

    /// Applies `p` to every accepted state. Dense output inside a step still
    /// interpolates the unprojected update.
    pub fn projection(mut self, p: impl FnMut(&mut [f64]) + 'a) -> Self {
        self.projection = Some(Box::new(p));
        self
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn integrate(self) -> Result<OdeSolution, OdeError> {
        integrate(self)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Accepted mesh, states and a continuous interpolant over the span.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    // five coefficient vectors per step
    dense: Vec<f64>,
    pub stats: StepStats,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeErrorKind {
    #[error("step size {h:e} underflowed (stiff or singular problem)")]
    StepUnderflow { h: f64 },
    #[error("right-hand side failed: {0}")]
    Rhs(String),
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// Integration failure with the solution accepted so far.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("integration failed at t = {t}: {kind}")]
pub struct OdeError {
    pub kind: OdeErrorKind,
    pub t: f64,
    pub partial: Box<OdeSolution>,
}

impl OdeSolution {
    fn new(dim: usize, t0: f64, y0: &[f64]) -> Self {
        Self {
            dim,
            times: vec![t0],
            states: y0.to_vec(),
            dense: Vec::new(),
            stats: StepStats::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.states.chunks_exact(self.dim))
    }

    fn locate(&self, t: f64) -> Option<Result<usize, (usize, f64)>> {
        let (a, b) = (self.t_start(), self.t_end());
        let slack = 1e-12 * (b - a).abs().max(f64::MIN_POSITIVE);
        if !(t >= a - slack && t <= b + slack) {
            return None;
        }
        let t = t.clamp(a, b);
        let k = self.times.partition_point(|&x| x < t);
        if k < self.times.len() && self.times[k] == t {
            return Some(Ok(k));
        }
        let step = k - 1;
        let (t0, t1) = (self.times[step], self.times[step + 1]);
        Some(Err((step, (t - t0) / (t1 - t0))))
    }

    fn dense_component(&self, step: usize, theta: f64, i: usize) -> f64 {
        let n = self.dim;
        let base = step * 5 * n;
        let r = |j: usize| self.dense[base + j * n + i];
        let s1 = 1.0 - theta;
        r(0) + theta * (r(1) + s1 * (r(2) + theta * (r(3) + s1 * r(4))))
    }

    /// Interpolated state at `t`; `None` outside the integrated span.
    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        match self.locate(t)? {
            Ok(k) => Some(self.state(k).to_vec()),
            Err((step, theta)) => Some(
                (0..self.dim)
                    .map(|i| self.dense_component(step, theta, i))
                    .collect(),
            ),
        }
    }

    /// Single interpolated component at `t`.
    pub fn eval_component(&self, t: f64, i: usize) -> Option<f64> {
        match self.locate(t)? {
            Ok(k) => Some(self.state(k)[i]),
            Err((step, theta)) => Some(self.dense_component(step, theta, i)),
        }
    }
}

fn weighted_rms(v: &[f64], y_old: &[f64], y_new: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = v.len().max(1) as f64;
    let sum: f64 = v
        .iter()
        .zip(y_old.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sk = atol + rtol * a.abs().max(b.abs());
            (e / sk).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step(
    rhs: &mut Rhs<'_>,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    opts: &OdeOptions,
    h_max: f64,
    evaluations: &mut usize,
) -> f64 {
    let sk: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let dnf: f64 = f0.iter().zip(&sk).map(|(f, s)| (f / s).powi(2)).sum();
    let dny: f64 = y0.iter().zip(&sk).map(|(y, s)| (y / s).powi(2)).sum();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(h_max);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    *evaluations += 1;
    if rhs(t0 + h, &y1, &mut f1).is_err() {
        return (h * 1e-3).max(1e-12 * h_max);
    }
    let der2 = f1
        .iter()
        .zip(f0)
        .zip(&sk)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        .sqrt()
        / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(h_max)
}

/// Integrates `p` over its span.
pub fn integrate(p: OdeProblem<'_>) -> Result<OdeSolution, OdeError> {
    let OdeProblem {
        mut rhs,
        span: (t0, t1),
        y0,
        options: opts,
        mut projection,
    } = p;
    let n = y0.len();
    let mut sol = OdeSolution::new(n, t0, &y0);
    let fail = |kind: OdeErrorKind, t: f64, sol: OdeSolution| OdeError {
        kind,
        t,
        partial: Box::new(sol),
    };

    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(fail(
            OdeErrorKind::InvalidProblem(format!("degenerate span [{t0}, {t1}]")),
            t0,
            sol,
        ));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(fail(
            OdeErrorKind::InvalidProblem("tolerances must be positive".into()),
            t0,
            sol,
        ));
    }
    if n == 0 || y0.iter().any(|v| !v.is_finite()) {
        return Err(fail(
            OdeErrorKind::InvalidProblem("initial state must be non-empty and finite".into()),
            t0,
            sol,
        ));
    }

    let span = t1 - t0;
    let h_max = opts.max_step.unwrap_or(span).min(span);
    let h_min = 1e-12 * span;

    let mut y = y0;
    let mut k1 = vec![0.0; n];
    sol.stats.evaluations += 1;
    if let Err(msg) = rhs(t0, &y, &mut k1) {
        return Err(fail(OdeErrorKind::Rhs(msg), t0, sol));
    }
    let mut h = match opts.initial_step {
        Some(h) => h.min(h_max),
        None => initial_step(
            &mut rhs,
            t0,
            &y,
            &k1,
            &opts,
            h_max,
            &mut sol.stats.evaluations,
        ),
    };

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err_vec = vec![0.0; n];

    let mut t = t0;
    let mut facold: f64 = 1e-4;
    let mut just_rejected = false;

    while t < t1 {
        if sol.stats.accepted + sol.stats.rejected >= opts.max_steps {
            return Err(fail(OdeErrorKind::TooManySteps(opts.max_steps), t, sol));
        }
        let last = t + h >= t1 || t1 - (t + h) < h_min;
        if last {
            h = t1 - t;
        }
        if h < h_min && !last {
            return Err(fail(OdeErrorKind::StepUnderflow { h }, t, sol));
        }

        let stages = (|| -> Result<(), String> {
            for i in 0..n {
                ys[i] = y[i] + h * A21 * k1[i];
            }
            rhs(t + C2 * h, &ys, &mut k2)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(t + C3 * h, &ys, &mut k3)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(t + C4 * h, &ys, &mut k4)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(t + C5 * h, &ys, &mut k5)?;
            for i in 0..n {
                ys[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(t + h, &ys, &mut k6)?;
            for i in 0..n {
                y_new[i] =
                    y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            rhs(t + h, &y_new, &mut k7)?;
            Ok(())
        })();
        sol.stats.evaluations += 6;

        let err = match &stages {
            Ok(()) => {
                for i in 0..n {
                    err_vec[i] = h
                        * (E1 * k1[i]
                            + E3 * k3[i]
                            + E4 * k4[i]
                            + E5 * k5[i]
                            + E6 * k6[i]
                            + E7 * k7[i]);
                }
                weighted_rms(&err_vec, &y, &y_new, opts.rtol, opts.atol)
            }
            Err(_) => f64::NAN,
        };

        if !err.is_finite() {
            // failed stage or overflow: retreat hard
            sol.stats.rejected += 1;
            just_rejected = true;
            h *= 0.25;
            if h < h_min {
                let kind = match stages {
                    Err(msg) => OdeErrorKind::Rhs(msg),
                    Ok(()) => OdeErrorKind::StepUnderflow { h },
                };
                return Err(fail(kind, t, sol));
            }
            continue;
        }

        let fac11 = err.powf(EXPO);
        if err <= 1.0 {
            let mut fac = fac11 / facold.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
            let mut h_new = h / fac;
            facold = err.max(1e-4);

            // dense output coefficients
            let base = sol.dense.len();
            sol.dense.resize(base + 5 * n, 0.0);
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = h * k1[i] - dy;
                sol.dense[base + i] = y[i];
                sol.dense[base + n + i] = dy;
                sol.dense[base + 2 * n + i] = bspl;
                sol.dense[base + 3 * n + i] = dy - h * k7[i] - bspl;
                sol.dense[base + 4 * n + i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }

            let mut projected = false;
            if let Some(proj) = projection.as_mut() {
                proj(&mut y_new);
                projected = true;
            }
            t = if last { t1 } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            if projected {
                sol.stats.evaluations += 1;
                if let Err(msg) = rhs(t, &y, &mut k1) {
                    sol.times.push(t);
                    sol.states.extend_from_slice(&y);
                    sol.stats.accepted += 1;
                    return Err(fail(OdeErrorKind::Rhs(msg), t, sol));
                }
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            sol.times.push(t);
            sol.states.extend_from_slice(&y);
            sol.stats.accepted += 1;

            if just_rejected {
                h_new = h_new.min(h);
            }
            just_rejected = false;
            h = h_new.min(h_max);
        } else {
            sol.stats.rejected += 1;
            just_rejected = true;
            h /= (fac11 / SAFETY).min(1.0 / MIN_FACTOR);
            if h < h_min {
                return Err(fail(OdeErrorKind::StepUnderflow { h }, t, sol));
            }
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_solution_is_exact() {
        let sol = OdeProblem::new(
            |_, _, dy: &mut [f64]| {
                dy[0] = 0.0;
                Ok(())
            },
            (0.0, 5.0),
            vec![2.5],
        )
        .integrate()
        .unwrap();
        assert!(sol.iter().all(|(_, y)| y[0] == 2.5));
        assert_eq!(sol.eval(1.234).unwrap(), vec![2.5]);
        assert_eq!(sol.t_end(), 5.0);
    }

    #[test]
    fn exponential_decay() {
        let sol = OdeProblem::new(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = -y[0];
                Ok(())
            },
            (0.0, 1.0),
            vec![1.0],
        )
        .integrate()
        .unwrap();
        let exact = (-1.0f64).exp();
        assert!((sol.final_state()[0] - exact).abs() <= 1e-8 * exact);
        assert!((sol.final_state()[0] - 0.3678794).abs() < 1e-7);
    }

    #[test]
    fn sine_quadrature() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let sol = OdeProblem::new(
            |t, _: &[f64], dy: &mut [f64]| {
                dy[0] = t.cos();
                Ok(())
            },
            (0.0, half_pi),
            vec![0.0],
        )
        .integrate()
        .unwrap();
        assert!((sol.final_state()[0] - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn dense_output_matches_mesh() {
        let sol = OdeProblem::new(
            |t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0] + 0.1 * t.sin();
                Ok(())
            },
            (0.0, 10.0),
            vec![1.0, 0.0],
        )
        .integrate()
        .unwrap();
        for step in 0..sol.len() - 1 {
            for i in 0..2 {
                let start = sol.dense_component(step, 0.0, i);
                let end = sol.dense_component(step, 1.0, i);
                assert!((start - sol.state(step)[i]).abs() <= 1e-13);
                assert!((end - sol.state(step + 1)[i]).abs() <= 1e-13);
            }
        }
        assert!(sol.eval(-1.0).is_none());
        assert!(sol.eval(10.5).is_none());
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let sol = OdeProblem::new(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = -0.5 * y[0];
                Ok(())
            },
            (0.0, 8.0),
            vec![3.0],
        )
        .rtol(1e-10)
        .atol(1e-12)
        .integrate()
        .unwrap();
        for k in 0..=80 {
            let t = k as f64 * 0.1;
            let exact = 3.0 * (-0.5 * t).exp();
            assert!((sol.eval_component(t, 0).unwrap() - exact).abs() < 1e-9 * 3.0);
        }
    }

    #[test]
    fn rhs_failure_propagates_with_partial_solution() {
        let err = OdeProblem::new(
            |t, _: &[f64], dy: &mut [f64]| {
                if t > 0.5 {
                    return Err("singular".into());
                }
                dy[0] = 1.0;
                Ok(())
            },
            (0.0, 1.0),
            vec![0.0],
        )
        .integrate()
        .unwrap_err();
        assert!(matches!(err.kind, OdeErrorKind::Rhs(_)));
        assert!(err.t <= 0.5);
        assert!(!err.partial.is_empty());
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y², y(0) = 1 blows up at t = 1
        let err = OdeProblem::new(
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            (0.0, 2.0),
            vec![1.0],
        )
        .integrate()
        .unwrap_err();
        assert!(err.t < 1.0 + 1e-6);
        assert!(matches!(
            err.kind,
            OdeErrorKind::StepUnderflow { .. } | OdeErrorKind::TooManySteps(_)
        ));
    }

    #[test]
    fn invalid_problems_rejected() {
        let f = |_: f64, _: &[f64], dy: &mut [f64]| {
            dy[0] = 0.0;
            Ok(())
        };
        assert!(OdeProblem::new(f, (1.0, 1.0), vec![0.0])
            .integrate()
            .is_err());
        assert!(OdeProblem::new(f, (0.0, 1.0), vec![0.0])
            .rtol(0.0)
            .integrate()
            .is_err());
        assert!(OdeProblem::new(f, (0.0, 1.0), vec![f64::NAN])
            .integrate()
            .is_err());
    }

    #[test]
    fn projection_is_applied_to_accepted_states() {
        let sol = OdeProblem::new(
            |_, _: &[f64], dy: &mut [f64]| {
                dy[0] = 1.0;
                dy[1] = 1.0;
                Ok(())
            },
            (0.0, 1.0),
            vec![0.0, 0.0],
        )
        .projection(|y: &mut [f64]| y[1] = 0.0)
        .integrate()
        .unwrap();
        assert!(sol.iter().all(|(_, y)| y[1] == 0.0));
        assert!((sol.final_state()[0] - 1.0).abs() < 1e-12);
    }
}
