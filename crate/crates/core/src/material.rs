//! Material parameters, thermodynamic state functions, stress and
//! dissipation bookkeeping for the two-spring natural-configuration model.
//!
//! The Helmholtz potential is neo-Hookean in both `B_p` and `B_G` with
//! temperature-affine moduli:
//!
//! ```text
//! ψ = Aˢ + (Bˢ + c₂ˢ)(θ − θ_s) − ½c₁ˢ(θ − θ_s)² − c₂ˢ θ ln(θ/θ_s)
//!     + (μ_G0 − μ_G1 θ)/(2ϱθ_s) (I_{B_G} − 3)
//!     + (μ_p0 − μ_p1 θ)/(2ϱθ_s) (I_{B_p} − 3)
//! ```
//!
//! and the mechanical dissipation is `ξ_m = η D_G · (B_p D_G)`.
//! Only the isothermal working set `(μ̄_p, μ̄_G, η)` influences stress or
//! creep; the thermal block is used for state-function reporting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensors::{SpdFactor, SymTensor3, TensorError};

/// Denominator floor for the relative dissipation-identity residual (W/m³).
pub const DISSIPATION_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("invalid material configuration: {0}")]
    Config(String),
    #[error("invalid thermal state: {0}")]
    ThermalState(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Thermal coefficients. None of these are fit to data; the defaults are
/// placeholders that only affect state-function reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    /// Pa; `None` means `μ̄_p · θ_s` (temperature-independent modulus).
    #[serde(default)]
    pub mu_p0: Option<f64>,
    /// Pa/K; `None` means 0.
    #[serde(default)]
    pub mu_p1: Option<f64>,
    #[serde(default)]
    pub mu_g0: Option<f64>,
    #[serde(default)]
    pub mu_g1: Option<f64>,
    /// K
    #[serde(default = "defaults::theta_s")]
    pub theta_s: f64,
    /// J/(kg·K²)
    #[serde(default)]
    pub c1: f64,
    /// J/(kg·K)
    #[serde(default = "defaults::c2")]
    pub c2: f64,
    /// J/kg
    #[serde(default)]
    pub a_s: f64,
    /// J/(kg·K)
    #[serde(default)]
    pub b_s: f64,
    /// W/(m·K)
    #[serde(default = "defaults::conductivity")]
    pub conductivity: f64,
    /// kg/m³
    #[serde(default = "defaults::density")]
    pub density: f64,
}

mod defaults {
    pub fn theta_s() -> f64 {
        293.15
    }
    pub fn c2() -> f64 {
        1000.0
    }
    pub fn conductivity() -> f64 {
        0.2
    }
    pub fn density() -> f64 {
        1320.0
    }
}

impl Default for ThermalParams {
    fn default() -> Self {
        Self {
            mu_p0: None,
            mu_p1: None,
            mu_g0: None,
            mu_g1: None,
            theta_s: defaults::theta_s(),
            c1: 0.0,
            c2: defaults::c2(),
            a_s: 0.0,
            b_s: 0.0,
            conductivity: defaults::conductivity(),
            density: defaults::density(),
        }
    }
}

/// Moduli and viscosity. `mu_g_bar = 0` is the Maxwell-fluid limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Pa
    pub mu_p_bar: f64,
    /// Pa
    pub mu_g_bar: f64,
    /// Pa·s
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalParams>,
}

/// Thermal block with the affine-modulus coefficients made explicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedThermal {
    pub mu_p0: f64,
    pub mu_p1: f64,
    pub mu_g0: f64,
    pub mu_g1: f64,
    pub theta_s: f64,
    pub c1: f64,
    pub c2: f64,
    pub a_s: f64,
    pub b_s: f64,
    pub conductivity: f64,
    pub density: f64,
}

impl MaterialParams {
    pub fn new(mu_p_bar: f64, mu_g_bar: f64, eta: f64) -> Result<Self, MaterialError> {
        let mp = Self {
            mu_p_bar,
            mu_g_bar,
            eta,
            thermal: None,
        };
        mp.validate()?;
        Ok(mp)
    }

    pub fn with_thermal(mut self, thermal: ThermalParams) -> Result<Self, MaterialError> {
        self.thermal = Some(thermal);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        let bad = |msg: String| Err(MaterialError::Config(msg));
        if !(self.mu_p_bar > 0.0 && self.mu_p_bar.is_finite()) {
            return bad(format!("mu_p_bar must be positive, got {}", self.mu_p_bar));
        }
        if !(self.mu_g_bar >= 0.0 && self.mu_g_bar.is_finite()) {
            return bad(format!(
                "mu_g_bar must be non-negative, got {}",
                self.mu_g_bar
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if let Some(th) = &self.thermal {
            if !(th.theta_s > 0.0) {
                return bad(format!("theta_s must be positive, got {}", th.theta_s));
            }
            if !(th.conductivity >= 0.0) {
                return bad(format!(
                    "conductivity must be non-negative, got {}",
                    th.conductivity
                ));
            }
            if !(th.density > 0.0) {
                return bad(format!("density must be positive, got {}", th.density));
            }
        }
        Ok(())
    }

    /// Relaxation time `η / (2μ̄_G)` of the small-strain creep response.
    /// Infinite in the Maxwell limit.
    pub fn retardation_time(&self) -> f64 {
        self.eta / (2.0 * self.mu_g_bar)
    }

    pub fn thermal(&self) -> ResolvedThermal {
        let th = self.thermal.unwrap_or_default();
        ResolvedThermal {
            mu_p0: th.mu_p0.unwrap_or(self.mu_p_bar * th.theta_s),
            mu_p1: th.mu_p1.unwrap_or(0.0),
            mu_g0: th.mu_g0.unwrap_or(self.mu_g_bar * th.theta_s),
            mu_g1: th.mu_g1.unwrap_or(0.0),
            theta_s: th.theta_s,
            c1: th.c1,
            c2: th.c2,
            a_s: th.a_s,
            b_s: th.b_s,
            conductivity: th.conductivity,
            density: th.density,
        }
    }

    /// Working set at temperature `theta` (K) from the affine modulus law.
    /// Without a thermal block the moduli are returned unchanged.
    pub fn at_temperature(&self, theta: f64) -> Result<Self, MaterialError> {
        if self.thermal.is_none() {
            return Ok(*self);
        }
        let th = self.thermal();
        let mu_g = if th.mu_g0 == 0.0 && th.mu_g1 == 0.0 {
            0.0
        } else {
            mu_bar(th.mu_g0, th.mu_g1, theta, th.theta_s)?
        };
        Ok(Self {
            mu_p_bar: mu_bar(th.mu_p0, th.mu_p1, theta, th.theta_s)?,
            mu_g_bar: mu_g,
            ..*self
        })
    }
}

/// Temperature and (optionally) its spatial gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalState {
    /// K
    pub theta: f64,
    /// K/m
    pub grad_theta: [f64; 3],
}

impl ThermalState {
    pub fn new(theta: f64) -> Result<Self, MaterialError> {
        Self::with_gradient(theta, [0.0; 3])
    }

    pub fn with_gradient(theta: f64, grad_theta: [f64; 3]) -> Result<Self, MaterialError> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(MaterialError::ThermalState(format!(
                "temperature must be positive, got {theta} K"
            )));
        }
        Ok(Self { theta, grad_theta })
    }

    /// Reference state of the material (`θ = θ_s`, no gradient).
    pub fn reference(mp: &MaterialParams) -> Self {
        Self {
            theta: mp.thermal().theta_s,
            grad_theta: [0.0; 3],
        }
    }
}

pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + 273.15
}

/// `(μ₀ − μ₁θ)/θ_s`.
pub fn mu_bar(mu0: f64, mu1: f64, theta: f64, theta_s: f64) -> Result<f64, MaterialError> {
    if !(theta_s > 0.0) {
        return Err(MaterialError::Config(format!(
            "theta_s must be positive, got {theta_s}"
        )));
    }
    let v = (mu0 - mu1 * theta) / theta_s;
    if !(v > 0.0) {
        return Err(MaterialError::Config(format!(
            "modulus ({mu0} - {mu1}·{theta})/{theta_s} = {v} is not positive"
        )));
    }
    Ok(v)
}

fn require_spd(b_p: &SymTensor3, b_g: &SymTensor3) -> Result<(), MaterialError> {
    SpdFactor::new(b_p)?;
    SpdFactor::new(b_g)?;
    Ok(())
}

/// Specific Helmholtz energy (J/kg).
pub fn helmholtz(
    b_p: &SymTensor3,
    b_g: &SymTensor3,
    th: &ThermalState,
    mp: &MaterialParams,
) -> Result<f64, MaterialError> {
    require_spd(b_p, b_g)?;
    let c = mp.thermal();
    let theta = th.theta;
    let dt = theta - c.theta_s;
    let thermal = c.a_s + (c.b_s + c.c2) * dt
        - 0.5 * c.c1 * dt * dt
        - c.c2 * theta * (theta / c.theta_s).ln();
    let k = 2.0 * c.density * c.theta_s;
    let mech = (c.mu_g0 - c.mu_g1 * theta) / k * (b_g.trace() - 3.0)
        + (c.mu_p0 - c.mu_p1 * theta) / k * (b_p.trace() - 3.0);
    Ok(thermal + mech)
}

/// Specific entropy `s = −∂ψ/∂θ` (J/(kg·K)).
pub fn entropy(
    b_p: &SymTensor3,
    b_g: &SymTensor3,
    th: &ThermalState,
    mp: &MaterialParams,
) -> Result<f64, MaterialError> {
    require_spd(b_p, b_g)?;
    let c = mp.thermal();
    let theta = th.theta;
    let k = 2.0 * c.density * c.theta_s;
    Ok(-(c.b_s + c.c2)
        + c.c1 * (theta - c.theta_s)
        + c.c2 * (theta / c.theta_s).ln()
        + c.c2
        + c.mu_g1 / k * (b_g.trace() - 3.0)
        + c.mu_p1 / k * (b_p.trace() - 3.0))
}

/// Specific internal energy (J/kg), evaluated in closed form.
pub fn internal_energy(
    b_p: &SymTensor3,
    b_g: &SymTensor3,
    th: &ThermalState,
    mp: &MaterialParams,
) -> Result<f64, MaterialError> {
    require_spd(b_p, b_g)?;
    let c = mp.thermal();
    let theta = th.theta;
    let k = 2.0 * c.density * c.theta_s;
    Ok(c.a_s - c.b_s * c.theta_s
        + c.c2 * (theta - c.theta_s)
        + 0.5 * c.c1 * (theta * theta - c.theta_s * c.theta_s)
        + c.mu_g0 / k * (b_g.trace() - 3.0)
        + c.mu_p0 / k * (b_p.trace() - 3.0))
}

/// Specific heat at constant volume `c₁ˢθ + c₂ˢ` (J/(kg·K)).
pub fn heat_capacity(th: &ThermalState, mp: &MaterialParams) -> f64 {
    let c = mp.thermal();
    c.c1 * th.theta + c.c2
}

/// Fourier heat flux and the associated conduction dissipation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatFlux {
    /// W/m²
    pub flux: [f64; 3],
    /// `k|∇θ|²/θ` (W/(m³·K)·K = W/m³ per unit temperature scale)
    pub dissipation: f64,
}

pub fn heat_flux(th: &ThermalState, mp: &MaterialParams) -> Result<HeatFlux, MaterialError> {
    let k = mp.thermal().conductivity;
    if !(k >= 0.0) {
        return Err(MaterialError::Config(format!(
            "conductivity must be non-negative, got {k}"
        )));
    }
    let g = th.grad_theta;
    let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    Ok(HeatFlux {
        flux: g.map(|x| -k * x),
        dissipation: k * g2 / th.theta,
    })
}

/// Cauchy stress `T = p·I + μ̄_p·B_p`.
pub fn stress(b_p: &SymTensor3, pressure: f64, mp: &MaterialParams) -> SymTensor3 {
    SymTensor3::identity() * pressure + *b_p * mp.mu_p_bar
}

/// Mechanical dissipation and the corresponding entropy production.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipation {
    /// `ξ_m` (W/m³)
    pub rate: f64,
    /// `ζ = ξ_m/(ϱθ)` (W/(kg·K))
    pub entropy_production: f64,
}

/// `ξ_m = η D_G · (B_p D_G)`, evaluated in the eigenbasis of `B_p` as
/// `η Σ_k a_k Σ_j D̃_kj²` so it is non-negative term by term.
pub fn dissipation_rate(
    b_p: &SymTensor3,
    d_g: &SymTensor3,
    mp: &MaterialParams,
    th: &ThermalState,
) -> Result<Dissipation, MaterialError> {
    let factor = SpdFactor::new(b_p)?;
    Ok(dissipation_factored(&factor, d_g, mp, th))
}

pub(crate) fn dissipation_factored(
    b_p: &SpdFactor,
    d_g: &SymTensor3,
    mp: &MaterialParams,
    th: &ThermalState,
) -> Dissipation {
    let dec = b_p.decomp();
    let d = dec.to_eigenbasis(d_g);
    let mut sum = 0.0;
    for k in 0..3 {
        let row: f64 = (0..3).map(|j| d.get(k, j).powi(2)).sum();
        sum += dec.values[k] * row;
    }
    let rate = mp.eta * sum;
    Dissipation {
        rate,
        entropy_production: rate / (mp.thermal().density * th.theta),
    }
}

/// Relative residual of the power identity `(T − μ̄_G B_G)·D_G = ξ_m` with
/// `T = p·I + μ̄_p B_p`.
///
/// `D_G` is traceless, so the pressure drops out and only the deviatoric
/// part of `T − μ̄_G B_G` does work. It is formed from `B_p − I` and
/// `B_G − I`; near the rest state the full tensors would lose every digit of
/// the small difference to rounding in `p`.
pub fn dissipation_identity_residual(
    b_p: &SymTensor3,
    b_g: &SymTensor3,
    d_g: &SymTensor3,
    mp: &MaterialParams,
    th: &ThermalState,
) -> Result<f64, MaterialError> {
    let xi = dissipation_rate(b_p, d_g, mp, th)?.rate;
    Ok(identity_residual(b_p, b_g, d_g, xi, mp))
}

pub(crate) fn identity_residual(
    b_p: &SymTensor3,
    b_g: &SymTensor3,
    d_g: &SymTensor3,
    xi: f64,
    mp: &MaterialParams,
) -> f64 {
    let i = SymTensor3::identity();
    let driving = ((*b_p - i) * mp.mu_p_bar - (*b_g - i) * mp.mu_g_bar).deviatoric();
    let power = driving.dot(d_g);
    (power - xi).abs() / xi.max(DISSIPATION_FLOOR)
}
