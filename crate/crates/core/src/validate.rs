//! Self-check suite: thermodynamic invariants along driven trajectories,
//! tensor/scalar equivalence, and the small-strain limit.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evolution::{
    dg_rate, drive, relax, DriveOptions, EvolutionError, EvolutionState, Trajectory,
};
use crate::exec::Execution;
use crate::kinematics::MotionProtocol;
use crate::material::MaterialParams;
use crate::tensors::{SymTensor3, Tensor3};
use crate::uniaxial::{
    lambda_rate, simulate_creep, simulate_creep_with, sls_creep_analytic, solve_b, CreepOptions,
    CreepSegment, LambdaRateFn, UniaxialError,
};

pub const DET_LIMIT: f64 = 1e-8;
pub const IDENTITY_LIMIT: f64 = 1e-8;
pub const TRACE_LIMIT: f64 = 1e-12;
pub const EQUIVALENCE_LIMIT: f64 = 1e-6;
pub const SLS_LIMIT: f64 = 5e-3;
pub const RECOVERY_LIMIT: f64 = 1e-3;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl CheckResult {
    fn bound(name: &'static str, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: value <= limit,
            value,
            limit,
            detail: detail.into(),
        }
    }

    fn failed(name: &'static str, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: false,
            value: f64::NAN,
            limit,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} {:.3e} (limit {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.limit
        )?;
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct SuiteConfig {
    /// Only the sub-second checks.
    pub quick: bool,
    /// Stretch-rate law used by the scalar simulator in the suite.
    pub rate: Arc<LambdaRateFn>,
    pub execution: Execution,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            quick: false,
            rate: Arc::new(lambda_rate),
            execution: Execution::default(),
        }
    }
}

impl fmt::Debug for SuiteConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SuiteConfig")
            .field("quick", &self.quick)
            .field("execution", &self.execution)
            .finish_non_exhaustive()
    }
}

fn pmr15() -> MaterialParams {
    MaterialParams {
        mu_p_bar: 3.76e8,
        mu_g_bar: 4.42e8,
        eta: 6.22e12,
        thermal: None,
    }
}

/// Worst-case invariant values over a set of trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantReport {
    pub max_det_drift: f64,
    pub min_dissipation: f64,
    pub max_identity_residual: f64,
    pub samples: usize,
}

impl InvariantReport {
    pub fn of(trajectories: &[Trajectory]) -> Self {
        let mut r = Self {
            min_dissipation: f64::INFINITY,
            ..Self::default()
        };
        for t in trajectories {
            r.max_det_drift = r.max_det_drift.max(t.max_det_drift());
            r.min_dissipation = r.min_dissipation.min(t.min_dissipation());
            r.max_identity_residual = r.max_identity_residual.max(t.max_identity_residual());
            r.samples += t.samples.len();
        }
        r
    }
}

/// Trajectories the invariant checks run on: step relaxation, constant
/// strain-rate extension, and simple shear.
pub fn invariant_trajectories(quick: bool) -> Result<Vec<Trajectory>, EvolutionError> {
    let mp = pmr15();
    let tau = mp.retardation_time();
    let opts = DriveOptions::default();
    let mut out = vec![
        relax(1.01, &mp, 3.0 * tau, &opts)?,
        drive(
            &MotionProtocol::constant_strain_rate(1e-5, (0.0, 2e4)),
            &mp,
            EvolutionState::rest(),
            &opts,
        )?,
    ];
    if !quick {
        out.push(relax(1.2, &mp, 3.0 * tau, &opts)?);
        out.push(drive(
            &MotionProtocol::simple_shear(|t| (2e-5 * t, 2e-5), (0.0, 2e4)),
            &mp,
            EvolutionState::rest(),
            &opts,
        )?);
        let q = rotation(0.3, -1.1, 0.7);
        out.push(drive(
            &MotionProtocol::constant_strain_rate(1e-5, (0.0, 2e4)).rotated(q),
            &mp,
            EvolutionState::rest(),
            &opts,
        )?);
    }
    Ok(out)
}

/// Proper rotation from z-y-z Euler angles.
pub fn rotation(a: f64, b: f64, c: f64) -> Tensor3 {
    let rz = |t: f64| {
        Tensor3::from_rows([
            [t.cos(), -t.sin(), 0.0],
            [t.sin(), t.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ])
    };
    let ry = Tensor3::from_rows([
        [b.cos(), 0.0, b.sin()],
        [0.0, 1.0, 0.0],
        [-b.sin(), 0.0, b.cos()],
    ]);
    rz(a) * ry * rz(c)
}

/// Random SPD tensor with eigenvalues in roughly `[0.5, 2]`.
pub fn random_spd(rng: &mut impl Rng) -> SymTensor3 {
    let values = [
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
    ];
    let q = rotation(
        rng.random_range(0.0..std::f64::consts::TAU),
        rng.random_range(0.0..std::f64::consts::PI),
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    SymTensor3::diag(values[0], values[1], values[2]).congruence(&q)
}

/// Largest `|tr D_G|` over `n` random SPD pairs.
pub fn max_trace_dg(n: usize, seed: u64) -> Result<f64, EvolutionError> {
    let mp = pmr15();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let b_p = random_spd(&mut rng);
        let b_g = random_spd(&mut rng);
        worst = worst.max(dg_rate(&b_p, &b_g, &mp)?.trace().abs());
    }
    Ok(worst)
}

/// Maximum deviations when the tensor integrator replays a scalar creep run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    /// `max ‖B_p − diag(B, B^{-1/2}, B^{-1/2})‖ / ‖diag(..)‖`
    pub natural_config: f64,
    /// `max |T₁₁ − T|/|T|`
    pub stress: f64,
    /// `max |ε_tensor − ε_scalar|`
    pub strain: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquivalenceError {
    #[error(transparent)]
    Scalar(#[from] UniaxialError),
    #[error(transparent)]
    Tensor(#[from] EvolutionError),
}

/// Runs a single-segment creep with `rate`, then drives the tensor
/// integrator through the resulting `λ(t)` from the jumped state.
pub fn equivalence(
    mp: &MaterialParams,
    stress: f64,
    duration: f64,
    rate: Arc<LambdaRateFn>,
    rtol: f64,
) -> Result<Equivalence, EquivalenceError> {
    let creep = CreepOptions::default().with_rtol(rtol);
    let sol = Arc::new(simulate_creep_with(
        &[CreepSegment::new(stress, duration)?],
        mp,
        &creep,
        rate,
    )?);
    let b = sol.segments[0].b;
    let path = Arc::clone(&sol);
    let protocol = MotionProtocol::uniaxial(
        move |t| path.stretch_and_rate(t).unwrap_or((f64::NAN, f64::NAN)),
        (0.0, duration),
    );
    let x0 = EvolutionState::new(SymTensor3::diag(b, 1.0 / b.sqrt(), 1.0 / b.sqrt()))?;
    let traj = drive(&protocol, mp, x0, &DriveOptions::default().with_rtol(rtol))?;
    let target = SymTensor3::diag(b, 1.0 / b.sqrt(), 1.0 / b.sqrt());
    let mut eq = Equivalence {
        natural_config: 0.0,
        stress: 0.0,
        strain: 0.0,
        samples: traj.samples.len(),
    };
    for s in &traj.samples {
        eq.natural_config = eq
            .natural_config
            .max((s.b_p - target).norm() / target.norm());
        eq.stress = eq
            .stress
            .max((s.axial_stress - stress).abs() / stress.abs());
        let scalar = sol.strain_at(s.t).unwrap_or(f64::NAN);
        eq.strain = eq.strain.max((s.eps_axial - scalar).abs());
    }
    if !(eq.natural_config.is_finite() && eq.stress.is_finite() && eq.strain.is_finite()) {
        eq.natural_config = f64::INFINITY;
    }
    Ok(eq)
}

/// Max relative deviation of the nonlinear creep from the linear oracle on
/// `n` evenly spaced times in `[0, 10τ]`, at `T₁₁ = 1e-3·μ̄_p`.
pub fn sls_deviation(
    mp: &MaterialParams,
    rate: Arc<LambdaRateFn>,
    n: usize,
) -> Result<f64, UniaxialError> {
    let t11 = 1e-3 * mp.mu_p_bar;
    let span = 10.0 * mp.retardation_time();
    let sol = simulate_creep_with(
        &[CreepSegment::new(t11, span)?],
        mp,
        &CreepOptions::default(),
        rate,
    )?;
    let mut worst = 0.0f64;
    for i in 0..=n {
        let t = span * i as f64 / n as f64;
        let e = sol.strain_at(t).unwrap_or(f64::NAN);
        let lin = sls_creep_analytic(t11, mp, t);
        worst = worst.max((e - lin).abs() / lin.abs());
    }
    Ok(if worst.is_nan() { f64::INFINITY } else { worst })
}

/// `|ε_end| / max|ε|` after loading for `load` and unloading for `unload`.
pub fn recovery_ratio(
    mp: &MaterialParams,
    stress: f64,
    load: f64,
    unload: f64,
) -> Result<f64, UniaxialError> {
    let segs = [
        CreepSegment::new(stress, load)?,
        CreepSegment::new(0.0, unload)?,
    ];
    let sol = simulate_creep(&segs, mp, &CreepOptions::default())?;
    Ok(sol.final_strain().abs() / sol.max_abs_strain())
}

type Check = fn(&SuiteConfig) -> Vec<CheckResult>;

fn invariant_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    match invariant_trajectories(cfg.quick) {
        Ok(trajs) => {
            let r = InvariantReport::of(&trajs);
            let detail = format!("{} trajectories, {} samples", trajs.len(), r.samples);
            vec![
                CheckResult::bound("det drift", r.max_det_drift, DET_LIMIT, detail.clone()),
                CheckResult {
                    name: "dissipation >= 0",
                    passed: r.min_dissipation >= 0.0,
                    value: r.min_dissipation,
                    limit: 0.0,
                    detail: detail.clone(),
                },
                CheckResult::bound(
                    "dissipation identity",
                    r.max_identity_residual,
                    IDENTITY_LIMIT,
                    detail,
                ),
            ]
        }
        Err(e) => ["det drift", "dissipation >= 0", "dissipation identity"]
            .into_iter()
            .map(|n| CheckResult::failed(n, 0.0, e.to_string()))
            .collect(),
    }
}

fn trace_check(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let n = if cfg.quick { 100 } else { 1000 };
    vec![match max_trace_dg(n, 11) {
        Ok(v) => CheckResult::bound("trace D_G", v, TRACE_LIMIT, format!("{n} random SPD pairs")),
        Err(e) => CheckResult::failed("trace D_G", TRACE_LIMIT, e.to_string()),
    }]
}

fn equivalence_check(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mp = pmr15();
    let duration = if cfg.quick { 1.0 } else { 5.0 } * mp.retardation_time();
    vec![
        match equivalence(&mp, 1e7, duration, Arc::clone(&cfg.rate), 1e-8) {
            Ok(eq) => CheckResult::bound(
                "tensor/scalar equivalence",
                eq.natural_config.max(eq.stress),
                EQUIVALENCE_LIMIT,
                format!("strain {:.1e}, {} samples", eq.strain, eq.samples),
            ),
            Err(e) => CheckResult::failed(
                "tensor/scalar equivalence",
                EQUIVALENCE_LIMIT,
                e.to_string(),
            ),
        },
    ]
}

fn sls_check(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let n = if cfg.quick { 50 } else { 400 };
    vec![match sls_deviation(&pmr15(), Arc::clone(&cfg.rate), n) {
        Ok(v) => CheckResult::bound(
            "small-strain limit",
            v,
            SLS_LIMIT,
            "T11 = 1e-3 mu_p over [0, 10 tau]",
        ),
        Err(e) => CheckResult::failed("small-strain limit", SLS_LIMIT, e.to_string()),
    }]
}

fn recovery_check(_: &SuiteConfig) -> Vec<CheckResult> {
    let mp = pmr15();
    let tau = mp.retardation_time();
    vec![match recovery_ratio(&mp, 1e7, 10.0 * tau, 10.0 * tau) {
        Ok(v) => CheckResult::bound("recovery", v, RECOVERY_LIMIT, "10 tau load + 10 tau unload"),
        Err(e) => CheckResult::failed("recovery", RECOVERY_LIMIT, e.to_string()),
    }]
}

fn elastic_check(_: &SuiteConfig) -> Vec<CheckResult> {
    let mp = pmr15();
    vec![match solve_b(1e7, mp.mu_p_bar) {
        Ok(b) => {
            let residual = (mp.mu_p_bar * (b - b.powf(-0.5)) - 1e7).abs() / mp.mu_p_bar;
            CheckResult::bound("elastic root", residual, 1e-12, format!("B = {b:.9}"))
        }
        Err(e) => CheckResult::failed("elastic root", 1e-12, e.to_string()),
    }]
}

/// Runs the suite; the checks themselves run under `cfg.execution`.
pub fn run_suite(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let mut checks: Vec<Check> = vec![
        elastic_check,
        trace_check,
        invariant_checks,
        equivalence_check,
        sls_check,
    ];
    if !cfg.quick {
        checks.push(recovery_check);
    }
    cfg.execution
        .map(&checks, |c| c(cfg))
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_proper_orthogonal() {
        let q = rotation(0.3, -1.1, 0.7);
        assert!((q * q.transpose() - Tensor3::identity()).norm() < 1e-15);
        assert!((q.det() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quick_suite_passes() {
        let results = run_suite(&SuiteConfig {
            quick: true,
            ..SuiteConfig::default()
        });
        for r in &results {
            assert!(r.passed, "{r}");
        }
    }
}
