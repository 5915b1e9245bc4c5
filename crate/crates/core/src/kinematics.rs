//! Prescribed motions and the configuration maps derived from them.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::tensors::{SpdFactor, SymTensor3, Tensor3, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("stretch must be positive, got {0}")]
    NonPositiveStretch(f64),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// `F = diag(λ, λ^{-1/2}, λ^{-1/2})`.
pub fn uniaxial_deformation(stretch: f64) -> Result<Tensor3, KinematicsError> {
    if !(stretch > 0.0) {
        return Err(KinematicsError::NonPositiveStretch(stretch));
    }
    let lateral = 1.0 / stretch.sqrt();
    Ok(Tensor3::diag(stretch, lateral, lateral))
}

/// `L = diag(λ̇/λ, −λ̇/(2λ), −λ̇/(2λ))`.
pub fn uniaxial_velocity_gradient(stretch: f64, rate: f64) -> Result<Tensor3, KinematicsError> {
    if !(stretch > 0.0) {
        return Err(KinematicsError::NonPositiveStretch(stretch));
    }
    let axial = rate / stretch;
    Ok(Tensor3::diag(axial, -0.5 * axial, -0.5 * axial))
}

/// Elastic stretch of the natural configuration and the stored-energy strain.
#[derive(Debug, Clone, Copy)]
pub struct NaturalMaps {
    /// `V = B_p^{1/2}`.
    pub stretch: SymTensor3,
    /// `B_G = V^{-1}·B·V^{-1}`.
    pub b_g: SymTensor3,
}

/// Computes `V` and `B_G` from the total left Cauchy–Green tensor `B` and the
/// natural-configuration tensor `B_p`.
pub fn natural_maps(b: &SymTensor3, b_p: &SymTensor3) -> Result<NaturalMaps, KinematicsError> {
    let factor = SpdFactor::new(b_p)?;
    Ok(natural_maps_factored(b, &factor))
}

pub(crate) fn natural_maps_factored(b: &SymTensor3, b_p: &SpdFactor) -> NaturalMaps {
    let v_inv = b_p.inv_sqrt();
    NaturalMaps {
        stretch: b_p.sqrt(),
        b_g: b.congruence(&v_inv.to_tensor()),
    }
}

/// `G = V^{-1}·F`; diagnostics only.
pub fn reference_to_natural(f: &Tensor3, b_p: &SymTensor3) -> Result<Tensor3, KinematicsError> {
    let v_inv = SpdFactor::new(b_p)?.inv_sqrt();
    Ok(v_inv.to_tensor() * *f)
}

/// Scalar driving path: returns the value and its time derivative.
pub type ScalarPath = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    t: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self, KinematicsError> {
        if t.len() != y.len() || t.len() < 2 {
            return Err(KinematicsError::InvalidProtocol(
                "sampled path needs at least two (t, value) pairs".into(),
            ));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KinematicsError::InvalidProtocol(
                "sample times must be strictly increasing".into(),
            ));
        }
        if t.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(KinematicsError::InvalidProtocol("non-finite sample".into()));
        }
        let n = t.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|k| (y[k + 1] - y[k]) / (t[k + 1] - t[k]))
            .collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            slopes[k] = if secants[k - 1] * secants[k] <= 0.0 {
                0.0
            } else {
                0.5 * (secants[k - 1] + secants[k])
            };
        }
        for k in 0..n - 1 {
            if secants[k] == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let a = slopes[k] / secants[k];
            let b = slopes[k + 1] / secants[k];
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[k] = tau * a * secants[k];
                slopes[k + 1] = tau * b * secants[k];
            }
        }
        Ok(Self { t, y, slopes })
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    /// Value and derivative; clamps to the end values outside the span.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        if t <= self.t[0] {
            return (self.y[0], if t == self.t[0] { self.slopes[0] } else { 0.0 });
        }
        if t >= self.t[n - 1] {
            return (
                self.y[n - 1],
                if t == self.t[n - 1] {
                    self.slopes[n - 1]
                } else {
                    0.0
                },
            );
        }
        let k = self.t.partition_point(|&x| x <= t) - 1;
        let h = self.t[k + 1] - self.t[k];
        let s = (t - self.t[k]) / h;
        let (y0, y1, m0, m1) = (self.y[k], self.y[k + 1], self.slopes[k], self.slopes[k + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let value = h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
        let d00 = 6.0 * s * (s - 1.0) / h;
        let d10 = (1.0 - s) * (1.0 - 3.0 * s);
        let d01 = -d00;
        let d11 = s * (3.0 * s - 2.0);
        let deriv = d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1;
        (value, deriv)
    }
}

/// Kind of prescribed motion.
#[derive(Clone)]
pub enum MotionKind {
    /// Isochoric uniaxial extension driven by `λ(t)`.
    Uniaxial(ScalarPath),
    /// Simple shear `F = I + γ(t) e₁⊗e₂`.
    SimpleShear(ScalarPath),
    /// Uniaxial extension through interpolated stretch samples.
    Sampled(MonotoneCubic),
}

impl fmt::Debug for MotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniaxial(_) => f.write_str("Uniaxial(..)"),
            Self::SimpleShear(_) => f.write_str("SimpleShear(..)"),
            Self::Sampled(c) => f.debug_tuple("Sampled").field(&c.span()).finish(),
        }
    }
}

/// A strain-controlled motion over a time span, optionally pre-rotated by a
/// constant rotation `Q` (`F → Q·F`).
#[derive(Debug, Clone)]
pub struct MotionProtocol {
    pub kind: MotionKind,
    pub span: (f64, f64),
    pub rotation: Option<Tensor3>,
}

impl MotionProtocol {
    pub fn uniaxial(
        stretch: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static,
        span: (f64, f64),
    ) -> Self {
        Self {
            kind: MotionKind::Uniaxial(Arc::new(stretch)),
            span,
            rotation: None,
        }
    }

    pub fn constant_stretch(stretch: f64, span: (f64, f64)) -> Self {
        Self::uniaxial(move |_| (stretch, 0.0), span)
    }

    /// `λ(t) = exp(rate·(t − t₀))`: constant logarithmic strain rate.
    pub fn constant_strain_rate(rate: f64, span: (f64, f64)) -> Self {
        let t0 = span.0;
        Self::uniaxial(
            move |t| {
                let l = (rate * (t - t0)).exp();
                (l, rate * l)
            },
            span,
        )
    }

    pub fn simple_shear(
        shear: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static,
        span: (f64, f64),
    ) -> Self {
        Self {
            kind: MotionKind::SimpleShear(Arc::new(shear)),
            span,
            rotation: None,
        }
    }

    pub fn sampled(times: Vec<f64>, stretches: Vec<f64>) -> Result<Self, KinematicsError> {
        if let Some(&bad) = stretches.iter().find(|&&l| !(l > 0.0)) {
            return Err(KinematicsError::NonPositiveStretch(bad));
        }
        let curve = MonotoneCubic::new(times, stretches)?;
        let span = curve.span();
        Ok(Self {
            kind: MotionKind::Sampled(curve),
            span,
            rotation: None,
        })
    }

    pub fn rotated(mut self, q: Tensor3) -> Self {
        self.rotation = Some(q);
        self
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let (t0, t1) = self.span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(KinematicsError::InvalidProtocol(format!(
                "time span [{t0}, {t1}] is degenerate"
            )));
        }
        if let Some(q) = &self.rotation {
            let qqt = *q * q.transpose();
            if (qqt - Tensor3::identity()).norm() > 1e-12 || (q.det() - 1.0).abs() > 1e-12 {
                return Err(KinematicsError::InvalidProtocol(
                    "rotation is not proper orthogonal".into(),
                ));
            }
        }
        // evaluating at the ends catches non-positive stretches there
        self.deformation_gradient(t0)?;
        self.deformation_gradient(t1)?;
        Ok(())
    }

    pub fn is_uniaxial(&self) -> bool {
        !matches!(self.kind, MotionKind::SimpleShear(_))
    }

    fn local(&self, t: f64) -> Result<(Tensor3, Tensor3), KinematicsError> {
        match &self.kind {
            MotionKind::Uniaxial(path) => {
                let (l, ld) = path(t);
                Ok((uniaxial_deformation(l)?, uniaxial_velocity_gradient(l, ld)?))
            }
            MotionKind::Sampled(curve) => {
                let (l, ld) = curve.eval(t);
                Ok((uniaxial_deformation(l)?, uniaxial_velocity_gradient(l, ld)?))
            }
            MotionKind::SimpleShear(path) => {
                let (g, gd) = path(t);
                let f = Tensor3::from_rows([[1.0, g, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
                let l = Tensor3::from_rows([[0.0, gd, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
                Ok((f, l))
            }
        }
    }

    /// Deformation gradient `F(t)` and velocity gradient `L(t)`.
    pub fn gradients(&self, t: f64) -> Result<(Tensor3, Tensor3), KinematicsError> {
        let (f, l) = self.local(t)?;
        Ok(match &self.rotation {
            Some(q) => (*q * f, *q * l * q.transpose()),
            None => (f, l),
        })
    }

    pub fn deformation_gradient(&self, t: f64) -> Result<Tensor3, KinematicsError> {
        Ok(self.gradients(t)?.0)
    }

    pub fn velocity_gradient(&self, t: f64) -> Result<Tensor3, KinematicsError> {
        Ok(self.gradients(t)?.1)
    }

    /// Unit vector of the loading axis (`Q·e₁`).
    pub fn axial_direction(&self) -> [f64; 3] {
        self.rotation
            .map(|q| q.column(0))
            .unwrap_or([1.0, 0.0, 0.0])
    }

    /// Unit vector of a lateral (traction-free) direction (`Q·e₂`).
    pub fn lateral_direction(&self) -> [f64; 3] {
        self.rotation
            .map(|q| q.column(1))
            .unwrap_or([0.0, 1.0, 0.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniaxial_deformation_examples() {
        assert_eq!(uniaxial_deformation(1.0).unwrap(), Tensor3::identity());
        assert_eq!(
            uniaxial_deformation(4.0).unwrap(),
            Tensor3::diag(4.0, 0.5, 0.5)
        );
        for l in [0.3, 1.7, 2.9, 11.0] {
            assert!((uniaxial_deformation(l).unwrap().det() - 1.0).abs() <= 1e-15);
        }
        assert!(matches!(
            uniaxial_deformation(0.0),
            Err(KinematicsError::NonPositiveStretch(_))
        ));
        assert!(uniaxial_deformation(-1.0).is_err());
    }

    #[test]
    fn uniaxial_velocity_gradient_examples() {
        assert_eq!(
            uniaxial_velocity_gradient(1.3, 0.0).unwrap(),
            Tensor3::diag(0.0, -0.0, -0.0)
        );
        assert_eq!(
            uniaxial_velocity_gradient(2.0, 1.0).unwrap(),
            Tensor3::diag(0.5, -0.25, -0.25)
        );
        let l = uniaxial_velocity_gradient(1.37, -0.77).unwrap();
        assert!(l.trace().abs() <= 1e-15);
        assert!(uniaxial_velocity_gradient(0.0, 1.0).is_err());
    }

    #[test]
    fn natural_maps_examples() {
        let b = SymTensor3::new(1.3, 0.9, 0.86, 0.05, -0.02, 0.01);
        let m = natural_maps(&b, &b).unwrap();
        assert!((m.b_g - SymTensor3::identity()).norm() < 1e-14);

        let m = natural_maps(&b, &SymTensor3::identity()).unwrap();
        assert!((m.b_g - b).norm() < 1e-15);

        let (lam, bb): (f64, f64) = (1.21, 1.08);
        let total = SymTensor3::diag(lam * lam, 1.0 / lam, 1.0 / lam);
        let bp = SymTensor3::diag(bb, bb.powf(-0.5), bb.powf(-0.5));
        let m = natural_maps(&total, &bp).unwrap();
        let expect = SymTensor3::diag(lam * lam / bb, bb.sqrt() / lam, bb.sqrt() / lam);
        assert!((m.b_g - expect).norm() < 1e-14);
    }

    #[test]
    fn natural_maps_rejects_non_spd() {
        let b = SymTensor3::identity();
        let bp = SymTensor3::diag(1.0, -1.0, -1.0);
        assert!(matches!(
            natural_maps(&b, &bp),
            Err(KinematicsError::Tensor(_))
        ));
    }

    #[test]
    fn monotone_cubic_reproduces_linear_data() {
        let c = MonotoneCubic::new(vec![0.0, 1.0, 3.0], vec![1.0, 1.5, 2.5]).unwrap();
        let (v, d) = c.eval(2.0);
        assert!((v - 2.0).abs() < 1e-15);
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn monotone_cubic_keeps_monotone_data_monotone() {
        let t = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![1.0, 1.01, 1.5, 1.51, 3.0];
        let c = MonotoneCubic::new(t, y).unwrap();
        let mut prev = c.eval(0.0).0;
        for k in 1..=400 {
            let (v, d) = c.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            assert!(d >= -1e-12);
            prev = v;
        }
    }

    #[test]
    fn sampled_protocol_validation() {
        assert!(MotionProtocol::sampled(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(MotionProtocol::sampled(vec![0.0, 0.0], vec![1.0, 1.1]).is_err());
        let p = MotionProtocol::sampled(vec![0.0, 1.0, 2.0], vec![1.0, 1.1, 1.15]).unwrap();
        assert_eq!(p.span, (0.0, 2.0));
        p.validate().unwrap();
    }

    #[test]
    fn rotated_protocol_conjugates_gradients() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let q = Tensor3::from_rows([[c, -c, 0.0], [c, c, 0.0], [0.0, 0.0, 1.0]]);
        let p = MotionProtocol::constant_strain_rate(0.1, (0.0, 1.0)).rotated(q);
        p.validate().unwrap();
        let (f, l) = p.gradients(0.5).unwrap();
        let (f0, l0) = MotionProtocol::constant_strain_rate(0.1, (0.0, 1.0))
            .gradients(0.5)
            .unwrap();
        assert!((f - q * f0).norm() < 1e-15);
        assert!((l - q * l0 * q.transpose()).norm() < 1e-15);
        assert!(l.trace().abs() < 1e-15);
    }
}
