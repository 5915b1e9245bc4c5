//! General 3-D material-point integrator for the natural configuration.
//!
//! At every instant the flow rule
//!
//! ```text
//! c·I + μ̄_p B_p = μ̄_G B_G + (η/2)(B_p D_G + D_G B_p)
//! c = [μ̄_G tr(B_p⁻¹B_G) − 3μ̄_p] / tr(B_p⁻¹)
//! ```
//!
//! is solved for `D_G` (a Sylvester equation in the eigenbasis of `B_p`);
//! the natural configuration then advances with
//! `Ḃ_p = L·B_p + B_p·Lᵀ − 2 V·D_G·V`, `V = B_p^{1/2}`.

use std::io::Write;

use thiserror::Error;

use crate::kinematics::{natural_maps_factored, KinematicsError, MotionKind, MotionProtocol};
use crate::material::{
    dissipation_factored, identity_residual, stress, MaterialParams, ThermalState,
};
use crate::odesolve::{OdeErrorKind, OdeOptions, OdeProblem, OdeSolution};
use crate::tensors::{SpdFactor, SymTensor3, Tensor3, TensorError};

/// Runs abort once `|det B_p − 1|` exceeds this.
pub const DET_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("initial state: {0}")]
    InitialState(String),
    #[error("integration failed at t = {t}: {kind}")]
    Integration {
        kind: OdeErrorKind,
        t: f64,
        partial: Box<Trajectory>,
    },
    #[error("det B_p drifted to {det} at t = {t}")]
    DetDrift {
        t: f64,
        det: f64,
        partial: Box<Trajectory>,
    },
}

impl EvolutionError {
    /// Samples recorded before the failure, if any.
    pub fn partial(&self) -> Option<&Trajectory> {
        match self {
            Self::Integration { partial, .. } | Self::DetDrift { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// Natural-configuration state (SPD, unimodular `B_p`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionState {
    pub b_p: SymTensor3,
}

impl EvolutionState {
    pub fn rest() -> Self {
        Self {
            b_p: SymTensor3::identity(),
        }
    }

    pub fn new(b_p: SymTensor3) -> Result<Self, EvolutionError> {
        SpdFactor::new(&b_p)?;
        let det = b_p.det();
        if (det - 1.0).abs() > DET_DRIFT_LIMIT {
            return Err(EvolutionError::InitialState(format!(
                "det B_p = {det} is not unimodular"
            )));
        }
        Ok(Self { b_p })
    }

    /// State right after an instantaneous isochoric stretch `λ` from rest.
    pub fn elastic_uniaxial(stretch: f64) -> Result<Self, EvolutionError> {
        let f = crate::kinematics::uniaxial_deformation(stretch)?;
        Ok(Self {
            b_p: f.left_cauchy_green(),
        })
    }

    fn to_vec(self) -> Vec<f64> {
        self.b_p.components().to_vec()
    }
}

fn sym_from_slice(y: &[f64]) -> SymTensor3 {
    SymTensor3::from_components([y[0], y[1], y[2], y[3], y[4], y[5]])
}

/// Incompressibility multiplier `c = p − λ` of the flow rule.
pub fn flow_multiplier(
    b_p: &SymTensor3,
    b_g: &SymTensor3,
    mp: &MaterialParams,
) -> Result<f64, EvolutionError> {
    let inv = SpdFactor::new(b_p)?.inverse();
    Ok(shifted_multiplier(&inv, b_p, b_g, mp) + mp.mu_g_bar - mp.mu_p_bar)
}

// c − (μ̄_G − μ̄_p), written in terms of B_p − I and B_G − I so that the
// rest state gives exactly zero.
fn shifted_multiplier(
    b_p_inv: &SymTensor3,
    b_p: &SymTensor3,
    b_g: &SymTensor3,
    mp: &MaterialParams,
) -> f64 {
    let i = SymTensor3::identity();
    let num = mp.mu_g_bar * b_p_inv.dot(&(*b_g - i)) - mp.mu_p_bar * b_p_inv.dot(&(*b_p - i));
    num / b_p_inv.trace()
}

fn dg_rate_factored(
    factor: &SpdFactor,
    b_p: &SymTensor3,
    b_g: &SymTensor3,
    mp: &MaterialParams,
) -> SymTensor3 {
    let i = SymTensor3::identity();
    let inv = factor.inverse();
    let c = shifted_multiplier(&inv, b_p, b_g, mp);
    let rhs = ((*b_p - i) * mp.mu_p_bar - (*b_g - i) * mp.mu_g_bar + i * c) * (2.0 / mp.eta);
    factor.solve_sylvester(&rhs)
}

/// Symmetric part of the velocity gradient of `G`, from the flow rule.
pub fn dg_rate(
    b_p: &SymTensor3,
    b_g: &SymTensor3,
    mp: &MaterialParams,
) -> Result<SymTensor3, EvolutionError> {
    let factor = SpdFactor::new(b_p)?;
    SpdFactor::new(b_g)?;
    Ok(dg_rate_factored(&factor, b_p, b_g, mp))
}

/// `Ḃ_p = L·B_p + B_p·Lᵀ − 2 V·D_G·V`.
pub fn bp_rate(
    b_p: &SymTensor3,
    l: &Tensor3,
    d_g: &SymTensor3,
) -> Result<SymTensor3, EvolutionError> {
    let factor = SpdFactor::new(b_p)?;
    Ok(bp_rate_factored(&factor, b_p, l, d_g))
}

fn bp_rate_factored(
    factor: &SpdFactor,
    b_p: &SymTensor3,
    l: &Tensor3,
    d_g: &SymTensor3,
) -> SymTensor3 {
    let lb = SymTensor3::from_tensor(&(*l * b_p.to_tensor())) * 2.0;
    let v = factor.sqrt();
    lb - d_g.congruence(&v.to_tensor()) * 2.0
}

/// Everything the flow rule determines at one instant.
#[derive(Debug, Clone, Copy)]
pub struct Rates {
    pub b_g: SymTensor3,
    pub d_g: SymTensor3,
    pub b_p_dot: SymTensor3,
}

pub fn rates(
    b_p: &SymTensor3,
    f: &Tensor3,
    l: &Tensor3,
    mp: &MaterialParams,
) -> Result<Rates, EvolutionError> {
    let factor = SpdFactor::new(b_p)?;
    let maps = natural_maps_factored(&f.left_cauchy_green(), &factor);
    let d_g = dg_rate_factored(&factor, b_p, &maps.b_g, mp);
    Ok(Rates {
        b_g: maps.b_g,
        d_g,
        b_p_dot: bp_rate_factored(&factor, b_p, l, &d_g),
    })
}

/// How the indeterminate pressure is fixed when reporting stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureConvention {
    /// Lateral faces traction free (`T₂₂ = 0` in the loading frame).
    LateralTractionFree,
    /// `tr T = 0`.
    Traceless,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub f: Tensor3,
    pub b_p: SymTensor3,
    pub b_g: SymTensor3,
    pub d_g: SymTensor3,
    /// Pa
    pub stress: SymTensor3,
    /// `½ ln(a·B·a)` along the loading axis `a`.
    pub eps_axial: f64,
    /// Normal stress along the loading axis (Pa).
    pub axial_stress: f64,
    /// W/m³
    pub xi_m: f64,
    pub identity_residual: f64,
    pub det_b_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub pressure_convention: PressureConvention,
}

impl Trajectory {
    pub fn final_sample(&self) -> Option<&TrajectorySample> {
        self.samples.last()
    }

    pub fn max_det_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.det_b_p - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.identity_residual)
            .fold(0.0, f64::max)
    }

    pub fn min_dissipation(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.xi_m)
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `t,eps_axial,T11_pa,detBp,xi_m,identity_residual`.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "t",
            "eps_axial",
            "T11_pa",
            "detBp",
            "xi_m",
            "identity_residual",
        ])?;
        for s in &self.samples {
            out.write_record(&[
                s.t.to_string(),
                s.eps_axial.to_string(),
                s.axial_stress.to_string(),
                s.det_b_p.to_string(),
                s.xi_m.to_string(),
                s.identity_residual.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveOptions {
    pub ode: OdeOptions,
    /// Rescale `B_p ← B_p / det(B_p)^{1/3}` after each accepted step.
    pub project_unimodular: bool,
    pub det_limit: f64,
}

impl Default for DriveOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            project_unimodular: false,
            det_limit: DET_DRIFT_LIMIT,
        }
    }
}

impl DriveOptions {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.ode.rtol = rtol;
        self
    }
}

fn quad(a: &SymTensor3, n: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += n[i] * a.get(i, j) * n[j];
        }
    }
    s
}

struct Recorder<'a> {
    protocol: &'a MotionProtocol,
    mp: &'a MaterialParams,
    thermal: ThermalState,
    convention: PressureConvention,
}

impl Recorder<'_> {
    fn sample(&self, t: f64, y: &[f64]) -> Result<TrajectorySample, EvolutionError> {
        let b_p = sym_from_slice(y);
        let (f, _) = self.protocol.gradients(t)?;
        let factor = SpdFactor::new(&b_p)?;
        let b = f.left_cauchy_green();
        let maps = natural_maps_factored(&b, &factor);
        let d_g = dg_rate_factored(&factor, &b_p, &maps.b_g, self.mp);
        let pressure = match self.convention {
            PressureConvention::LateralTractionFree => {
                -self.mp.mu_p_bar * quad(&b_p, self.protocol.lateral_direction())
            }
            PressureConvention::Traceless => -self.mp.mu_p_bar * b_p.trace() / 3.0,
        };
        let t_stress = stress(&b_p, pressure, self.mp);
        let xi = dissipation_factored(&factor, &d_g, self.mp, &self.thermal).rate;
        let axis = self.protocol.axial_direction();
        Ok(TrajectorySample {
            t,
            f,
            b_p,
            b_g: maps.b_g,
            d_g,
            stress: t_stress,
            eps_axial: 0.5 * quad(&b, axis).ln(),
            axial_stress: quad(&t_stress, axis),
            xi_m: xi,
            identity_residual: identity_residual(&b_p, &maps.b_g, &d_g, xi, self.mp),
            det_b_p: b_p.det(),
        })
    }

    fn record(&self, sol: &OdeSolution, det_limit: f64) -> Result<Trajectory, EvolutionError> {
        let mut traj = Trajectory {
            samples: Vec::with_capacity(sol.len()),
            pressure_convention: self.convention,
        };
        for (t, y) in sol.iter() {
            let s = self.sample(t, y)?;
            let det = s.det_b_p;
            traj.samples.push(s);
            if (det - 1.0).abs() > det_limit {
                return Err(EvolutionError::DetDrift {
                    t,
                    det,
                    partial: Box::new(traj),
                });
            }
        }
        Ok(traj)
    }
}

/// Integrates `B_p` under a prescribed motion starting from `x0`.
pub fn drive(
    protocol: &MotionProtocol,
    mp: &MaterialParams,
    x0: EvolutionState,
    opts: &DriveOptions,
) -> Result<Trajectory, EvolutionError> {
    protocol.validate()?;
    let x0 = EvolutionState::new(x0.b_p)?;
    let convention = match protocol.kind {
        MotionKind::SimpleShear(_) => PressureConvention::Traceless,
        _ => PressureConvention::LateralTractionFree,
    };
    let recorder = Recorder {
        protocol,
        mp,
        thermal: ThermalState::reference(mp),
        convention,
    };

    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), String> {
        let b_p = sym_from_slice(y);
        let (f, l) = protocol.gradients(t).map_err(|e| e.to_string())?;
        let r = rates(&b_p, &f, &l, mp).map_err(|e| e.to_string())?;
        dy.copy_from_slice(&r.b_p_dot.components());
        Ok(())
    };
    let mut problem = OdeProblem::new(rhs, protocol.span, x0.to_vec()).options(opts.ode);
    if opts.project_unimodular {
        problem = problem.projection(|y: &mut [f64]| {
            let b = sym_from_slice(y);
            let det = b.det();
            if det > 0.0 {
                let scaled = b * det.powf(-1.0 / 3.0);
                y.copy_from_slice(&scaled.components());
            }
        });
    }

    match problem.integrate() {
        Ok(sol) => recorder.record(&sol, opts.det_limit),
        Err(err) => {
            let partial = match recorder.record(&err.partial, opts.det_limit) {
                Ok(traj) => traj,
                Err(EvolutionError::DetDrift { partial, .. }) => *partial,
                Err(other) => return Err(other),
            };
            Err(EvolutionError::Integration {
                kind: err.kind,
                t: err.t,
                partial: Box::new(partial),
            })
        }
    }
}

/// Stress relaxation: instantaneous isochoric stretch to `stretch`, then held.
pub fn relax(
    stretch: f64,
    mp: &MaterialParams,
    hold_time: f64,
    opts: &DriveOptions,
) -> Result<Trajectory, EvolutionError> {
    let x0 = EvolutionState::elastic_uniaxial(stretch)?;
    let protocol = MotionProtocol::constant_stretch(stretch, (0.0, hold_time));
    drive(&protocol, mp, x0, opts)
}
