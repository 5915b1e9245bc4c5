//! Scalar creep/recovery under piecewise-constant axial stress.
//!
//! With lateral faces traction free, `T₁₁ = μ̄_p(B − B^{-1/2})` fixes the
//! axial component `B` of the natural configuration for each stress level,
//! and the stretch `λ` then relaxes toward equilibrium through a scalar ODE.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::material::{MaterialError, MaterialParams};
use crate::odesolve::{OdeError, OdeOptions, OdeProblem, OdeSolution};

/// Tolerance on `s = √B` in [`solve_b`].
pub const SOLVE_B_TOLERANCE: f64 = 1e-14;
/// `|T₁₁|/μ̄_p` above which the linear oracle warns.
pub const SMALL_STRAIN_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UniaxialError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid segment program: {0}")]
    InvalidProgram(String),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("segment {segment}: {source}")]
    Integration {
        segment: usize,
        #[source]
        source: Box<OdeError>,
    },
}

/// Axial component `B` of the natural configuration carrying stress `t11`.
///
/// Solves `s³ − a·s − 1 = 0` for `s = √B`, `a = t11/μ̄_p`: Newton from
/// `1 + a/3`, falling back to bisection whenever a step leaves the bracket.
pub fn solve_b(t11: f64, mu_p_bar: f64) -> Result<f64, UniaxialError> {
    if !t11.is_finite() || !mu_p_bar.is_finite() {
        return Err(UniaxialError::NonFinite("stress or modulus"));
    }
    if !(mu_p_bar > 0.0) {
        return Err(UniaxialError::NonPositive {
            name: "mu_p_bar",
            value: mu_p_bar,
        });
    }
    if t11 == 0.0 {
        return Ok(1.0);
    }
    let a = t11 / mu_p_bar;
    let g = |s: f64| s * s * s - a * s - 1.0;
    // g(0) = −1 and g(2 + |a|) > 0
    let mut lo = if g(1e-3) < 0.0 { 1e-3 } else { 0.0 };
    let mut hi = 2.0 + a.abs();
    let mut s = (1.0 + a / 3.0).clamp(lo, hi);
    for _ in 0..200 {
        let gs = g(s);
        if gs == 0.0 {
            break;
        }
        if gs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let dg = 3.0 * s * s - a;
        let newton = s - gs / dg;
        let next = if dg > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done =
            (next - s).abs() <= SOLVE_B_TOLERANCE * next.max(1.0) || hi - lo <= SOLVE_B_TOLERANCE;
        s = next;
        if done {
            break;
        }
    }
    Ok(s * s)
}

/// `T₁₁ = μ̄_p(B − B^{-1/2})`.
pub fn axial_stress(b: f64, mu_p_bar: f64) -> f64 {
    mu_p_bar * (b - 1.0 / b.sqrt())
}

/// Stretch rate `λ̇` at stretch `λ` with natural-configuration component
/// `B` changing at rate `Ḃ`:
///
/// ```text
/// λ̇ = λ{Ḃ/(2B) − (1/(ηB))[μ̄_G λ²/B − μ̄_p B − (μ̄_G(λ³+2B³) − 3μ̄_p B²λ)/(Bλ(1+2B^{3/2}))]}
/// ```
///
/// The bracket is evaluated in a rearranged form that vanishes exactly at
/// `λ = B = 1`.
pub fn lambda_rate(
    lambda: f64,
    b: f64,
    b_dot: f64,
    mp: &MaterialParams,
) -> Result<f64, UniaxialError> {
    if !(lambda > 0.0) {
        return Err(UniaxialError::NonPositive {
            name: "stretch",
            value: lambda,
        });
    }
    if !(b > 0.0) {
        return Err(UniaxialError::NonPositive {
            name: "B",
            value: b,
        });
    }
    let b32 = b * b.sqrt();
    let num = 2.0 * mp.mu_g_bar * b32 * (lambda * lambda * lambda - b32)
        + 2.0 * mp.mu_p_bar * b * b * lambda * (1.0 - b32);
    let bracket = num / (b * lambda * (1.0 + 2.0 * b32));
    Ok(lambda * (b_dot / (2.0 * b) - bracket / (mp.eta * b)))
}

/// Signature of [`lambda_rate`]; alternative laws can be injected into
/// [`simulate_creep_with`].
pub type LambdaRateFn =
    dyn Fn(f64, f64, f64, &MaterialParams) -> Result<f64, UniaxialError> + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreepSegment {
    /// Pa
    pub stress: f64,
    /// s
    pub duration: f64,
}

impl CreepSegment {
    pub fn new(stress: f64, duration: f64) -> Result<Self, UniaxialError> {
        let seg = Self { stress, duration };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<(), UniaxialError> {
        if !self.stress.is_finite() {
            return Err(UniaxialError::NonFinite("segment stress"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(UniaxialError::NonPositive {
                name: "segment duration",
                value: self.duration,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrainMeasure {
    /// `ε = ln λ`
    #[default]
    Logarithmic,
    /// `ε = λ − 1`
    Engineering,
}

impl StrainMeasure {
    pub fn from_stretch(self, lambda: f64) -> f64 {
        match self {
            Self::Logarithmic => lambda.ln(),
            Self::Engineering => lambda - 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreepOptions {
    pub ode: OdeOptions,
    pub strain: StrainMeasure,
}

impl Default for CreepOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            strain: StrainMeasure::Logarithmic,
        }
    }
}

impl CreepOptions {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.ode.rtol = rtol;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSolution {
    pub start: f64,
    pub end: f64,
    pub stress: f64,
    pub b: f64,
    /// Stretch history within the segment (post-jump start to pre-jump end).
    pub stretch: OdeSolution,
}

/// Dense solution of a segment program.
#[derive(Clone)]
pub struct CreepSolution {
    pub segments: Vec<SegmentSolution>,
    pub strain_measure: StrainMeasure,
    mp: MaterialParams,
    rate: Arc<LambdaRateFn>,
}

impl fmt::Debug for CreepSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CreepSolution")
            .field("segments", &self.segments)
            .field("strain_measure", &self.strain_measure)
            .field("mp", &self.mp)
            .finish_non_exhaustive()
    }
}

impl CreepSolution {
    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// Index of the segment active at `t`; boundaries belong to the later one.
    pub fn segment_at(&self, t: f64) -> Option<usize> {
        let first = self.segments.first()?;
        let slack = 1e-12 * self.t_end().abs().max(1.0);
        if t < first.start - slack || t > self.t_end() + slack {
            return None;
        }
        let k = self.segments.partition_point(|s| s.start <= t);
        Some(k.saturating_sub(1))
    }

    pub fn stretch_in_segment(&self, k: usize, t: f64) -> Option<f64> {
        self.segments.get(k)?.stretch.eval_component(t, 0)
    }

    pub fn strain_in_segment(&self, k: usize, t: f64) -> Option<f64> {
        Some(
            self.strain_measure
                .from_stretch(self.stretch_in_segment(k, t)?),
        )
    }

    /// Stretch at `t` (right-continuous at segment boundaries).
    pub fn stretch_at(&self, t: f64) -> Option<f64> {
        self.stretch_in_segment(self.segment_at(t)?, t)
    }

    pub fn strain_at(&self, t: f64) -> Option<f64> {
        Some(self.strain_measure.from_stretch(self.stretch_at(t)?))
    }

    /// `(λ, λ̇)` at `t`, with `λ̇` from the rate law used for the run.
    pub fn stretch_and_rate(&self, t: f64) -> Option<(f64, f64)> {
        let k = self.segment_at(t)?;
        let lambda = self.stretch_in_segment(k, t)?;
        let rate = (self.rate)(lambda, self.segments[k].b, 0.0, &self.mp).ok()?;
        Some((lambda, rate))
    }

    /// Strain just before the end of segment `k`.
    pub fn segment_end_strain(&self, k: usize) -> Option<f64> {
        let seg = self.segments.get(k)?;
        Some(
            self.strain_measure
                .from_stretch(seg.stretch.final_state()[0]),
        )
    }

    /// Largest `|ε|` over all mesh points, including pre-jump ends.
    pub fn max_abs_strain(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.stretch.iter().map(|(_, y)| y[0]))
            .map(|l| self.strain_measure.from_stretch(l).abs())
            .fold(0.0, f64::max)
    }

    pub fn final_strain(&self) -> f64 {
        self.segment_end_strain(self.segments.len() - 1)
            .unwrap_or(0.0)
    }

    /// Mesh samples with strictly increasing times: every segment contributes
    /// `[start, end)`, the last one `[start, end]`.
    pub fn curve(&self) -> CreepCurve {
        let mut samples = Vec::new();
        let mut markers = Vec::new();
        let n = self.segments.len();
        for (k, seg) in self.segments.iter().enumerate() {
            markers.push(SegmentMarker {
                index: k,
                start: seg.start,
                sample: samples.len(),
                stress: seg.stress,
            });
            let m = seg.stretch.len();
            let take = if k + 1 == n { m } else { m - 1 };
            for (t, y) in seg.stretch.iter().take(take) {
                samples.push(CurveSample {
                    t,
                    strain: self.strain_measure.from_stretch(y[0]),
                });
            }
        }
        CreepCurve {
            label: String::new(),
            samples,
            markers,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub strain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMarker {
    pub index: usize,
    pub start: f64,
    /// Index of the first sample belonging to the segment.
    pub sample: usize,
    pub stress: f64,
}

/// Sampled strain history with segment boundaries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CreepCurve {
    pub label: String,
    pub samples: Vec<CurveSample>,
    pub markers: Vec<SegmentMarker>,
}

impl CreepCurve {
    /// A curve without segment markers, e.g. experimental points.
    pub fn from_points(
        label: impl Into<String>,
        points: impl IntoIterator<Item = (f64, f64)>,
    ) -> Self {
        Self {
            label: label.into(),
            samples: points
                .into_iter()
                .map(|(t, strain)| CurveSample { t, strain })
                .collect(),
            markers: Vec::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `t_s,strain` rows rounded to 1e-9, with `# segment <k> stress_pa=<v>`
    /// before the first row of each segment.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_s,strain")?;
        let mut markers = self.markers.iter().peekable();
        for (i, s) in self.samples.iter().enumerate() {
            while let Some(m) = markers.next_if(|m| m.sample == i) {
                writeln!(w, "# segment {} stress_pa={}", m.index, m.stress)?;
            }
            writeln!(w, "{},{}", round9(s.t), round9(s.strain))?;
        }
        Ok(())
    }
}

/// Formats `x` rounded to 1e-9 absolute, without trailing zeros.
pub(crate) fn round9(x: f64) -> String {
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    match s {
        "-0" | "" => "0".to_string(),
        _ => s.to_string(),
    }
}

/// Runs a segment program starting from the undeformed state.
pub fn simulate_creep(
    segments: &[CreepSegment],
    mp: &MaterialParams,
    opts: &CreepOptions,
) -> Result<CreepSolution, UniaxialError> {
    simulate_creep_with(segments, mp, opts, Arc::new(lambda_rate))
}

/// [`simulate_creep`] with a replacement stretch-rate law.
pub fn simulate_creep_with(
    segments: &[CreepSegment],
    mp: &MaterialParams,
    opts: &CreepOptions,
    rate: Arc<LambdaRateFn>,
) -> Result<CreepSolution, UniaxialError> {
    if segments.is_empty() {
        return Err(UniaxialError::InvalidProgram("no segments".into()));
    }
    mp.validate()?;
    let mut out = Vec::with_capacity(segments.len());
    let (mut t, mut lambda, mut b_prev) = (0.0, 1.0, 1.0);
    for (k, seg) in segments.iter().enumerate() {
        seg.validate()?;
        let b = solve_b(seg.stress, mp.mu_p_bar)?;
        lambda *= (b / b_prev).sqrt();
        let span = (t, t + seg.duration);
        let f = rate.as_ref();
        let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
            dy[0] = f(y[0], b, 0.0, mp).map_err(|e| e.to_string())?;
            Ok(())
        };
        let sol = OdeProblem::new(rhs, span, vec![lambda])
            .options(opts.ode)
            .integrate()
            .map_err(|e| UniaxialError::Integration {
                segment: k,
                source: Box::new(e),
            })?;
        lambda = sol.final_state()[0];
        b_prev = b;
        t = span.1;
        out.push(SegmentSolution {
            start: span.0,
            end: span.1,
            stress: seg.stress,
            b,
            stretch: sol,
        });
    }
    Ok(CreepSolution {
        segments: out,
        strain_measure: opts.strain,
        mp: *mp,
        rate,
    })
}

/// Small-strain creep under constant `t11` from rest:
/// `ε(t) = T/(3μ̄_p) + T/(3μ̄_G)·(1 − e^{−t/τ})`, `τ = η/(2μ̄_G)`,
/// or `T/(3μ̄_p) + 2T·t/(3η)` when `μ̄_G = 0`.
pub fn sls_creep_analytic(t11: f64, mp: &MaterialParams, t: f64) -> f64 {
    if t11.abs() > SMALL_STRAIN_LIMIT * mp.mu_p_bar {
        log::warn!(
            "linear creep oracle used at |T11|/mu_p = {:.3}, outside the small-strain range",
            t11.abs() / mp.mu_p_bar
        );
    }
    let elastic = t11 / (3.0 * mp.mu_p_bar);
    if mp.mu_g_bar == 0.0 {
        return elastic + 2.0 * t11 * t / (3.0 * mp.eta);
    }
    let tau = mp.eta / (2.0 * mp.mu_g_bar);
    elastic - t11 / (3.0 * mp.mu_g_bar) * (-t / tau).exp_m1()
}
