//! Fixed-shape 3×3 tensor algebra.
//!
//! [`SymTensor3`] stores the six independent components of a symmetric
//! tensor in the order `(xx, yy, zz, xy, yz, xz)`; [`Tensor3`] is a general
//! row-major 3×3 matrix. The spectral machinery (cyclic Jacobi sweeps) backs
//! the SPD square root and the Sylvester solve `A·X + X·A = M` used by the
//! flow rule.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Off-diagonal Frobenius norm (relative to ‖A‖) at which Jacobi stops.
pub const JACOBI_TOLERANCE: f64 = 1e-14;
/// Maximum number of cyclic sweeps before declaring a defect.
pub const JACOBI_MAX_SWEEPS: usize = 50;
/// A symmetric tensor is SPD when `λ_min > SPD_RATIO · λ_max`.
pub const SPD_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("tensor is not symmetric positive definite (eigenvalues {0:?})")]
    NotSpd([f64; 3]),
    #[error("tensor is singular (det = {0})")]
    Singular(f64),
    #[error("non-finite tensor component")]
    NonFinite,
    #[error("Jacobi eigensolver did not converge in {0} sweeps")]
    NoConvergence(usize),
}

/// Symmetric second-order tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymTensor3 {
    c: [f64; 6],
}

/// General second-order tensor, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor3 {
    m: [[f64; 3]; 3],
}

/// Principal invariants `(I, II, III)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariants {
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

/// Eigen-decomposition `A = Q·diag(values)·Qᵀ` of a symmetric tensor.
///
/// Eigenvalues are sorted in descending order. The columns of `frame` are the
/// eigenvectors; the first two have their largest-magnitude component
/// positive and the third completes a right-handed frame (`det Q = +1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDecomp {
    pub values: [f64; 3],
    pub frame: Tensor3,
}

const SYM_INDEX: [[usize; 3]; 3] = [[0, 3, 5], [3, 1, 4], [5, 4, 2]];

impl SymTensor3 {
    pub const fn new(xx: f64, yy: f64, zz: f64, xy: f64, yz: f64, xz: f64) -> Self {
        Self {
            c: [xx, yy, zz, xy, yz, xz],
        }
    }

    pub const fn from_components(c: [f64; 6]) -> Self {
        Self { c }
    }

    pub const fn components(&self) -> [f64; 6] {
        self.c
    }

    pub const fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub const fn zero() -> Self {
        Self { c: [0.0; 6] }
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Self::new(a, b, c, 0.0, 0.0, 0.0)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[SYM_INDEX[i][j]]
    }

    /// Symmetric part of a general tensor.
    pub fn from_tensor(t: &Tensor3) -> Self {
        let m = &t.m;
        Self::new(
            m[0][0],
            m[1][1],
            m[2][2],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[1][2] + m[2][1]),
            0.5 * (m[0][2] + m[2][0]),
        )
    }

    pub fn to_tensor(&self) -> Tensor3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        Tensor3 { m }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.c[0] + self.c[1] + self.c[2]
    }

    pub fn det(&self) -> f64 {
        let [xx, yy, zz, xy, yz, xz] = self.c;
        xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz)
    }

    /// Double contraction `A : B = Σ A_ij B_ij`.
    pub fn dot(&self, other: &Self) -> f64 {
        let a = &self.c;
        let b = &other.c;
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + 2.0 * (a[3] * b[3] + a[4] * b[4] + a[5] * b[5])
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn invariants(&self) -> Invariants {
        let tr = self.trace();
        Invariants {
            first: tr,
            second: 0.5 * (tr * tr - self.dot(self)),
            third: self.det(),
        }
    }

    /// Deviatoric part `A − (tr A / 3)·I`.
    pub fn deviatoric(&self) -> Self {
        let p = self.trace() / 3.0;
        *self - Self::identity() * p
    }

    /// Matrix product `self · other` (not symmetric in general).
    pub fn mul_sym(&self, other: &Self) -> Tensor3 {
        self.to_tensor() * other.to_tensor()
    }

    /// `A²`, symmetric.
    pub fn square(&self) -> Self {
        Self::from_tensor(&self.mul_sym(self))
    }

    /// Congruence `Q·A·Qᵀ`.
    pub fn congruence(&self, q: &Tensor3) -> Self {
        Self::from_tensor(&(*q * self.to_tensor() * q.transpose()))
    }

    /// Cofactor inverse.
    pub fn inverse(&self) -> Result<Self, TensorError> {
        let [xx, yy, zz, xy, yz, xz] = self.c;
        let det = self.det();
        if !det.is_finite() {
            return Err(TensorError::NonFinite);
        }
        let scale = self.norm().powi(3);
        if det == 0.0 || det.abs() <= 1e-300 || (scale > 0.0 && det.abs() < 1e-15 * scale) {
            return Err(TensorError::Singular(det));
        }
        let inv = 1.0 / det;
        Ok(Self::new(
            (yy * zz - yz * yz) * inv,
            (xx * zz - xz * xz) * inv,
            (xx * yy - xy * xy) * inv,
            (xz * yz - xy * zz) * inv,
            (xy * xz - xx * yz) * inv,
            (xy * yz - yy * xz) * inv,
        ))
    }

    pub fn eig(&self) -> Result<SpectralDecomp, TensorError> {
        eig_sym(self)
    }

    pub fn is_spd(&self) -> bool {
        self.eig()
            .map(|d| spd_check(&d.values).is_ok())
            .unwrap_or(false)
    }
}

impl Tensor3 {
    pub const fn from_rows(m: [[f64; 3]; 3]) -> Self {
        Self { m }
    }

    pub const fn rows(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub const fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0)
    }

    pub const fn zero() -> Self {
        Self { m: [[0.0; 3]; 3] }
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Self {
            m: [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn column(&self, j: usize) -> [f64; 3] {
        [self.m[0][j], self.m[1][j], self.m[2][j]]
    }

    pub fn from_columns(c0: [f64; 3], c1: [f64; 3], c2: [f64; 3]) -> Self {
        Self {
            m: [
                [c0[0], c1[0], c2[0]],
                [c0[1], c1[1], c2[1]],
                [c0[2], c1[2], c2[2]],
            ],
        }
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    pub fn inverse(&self) -> Result<Self, TensorError> {
        let m = &self.m;
        let det = self.det();
        if !det.is_finite() {
            return Err(TensorError::NonFinite);
        }
        if det == 0.0 {
            return Err(TensorError::Singular(det));
        }
        let inv = 1.0 / det;
        Ok(Self {
            m: [
                [
                    (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv,
                    (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
                    (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
                ],
                [
                    (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv,
                    (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
                    (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
                ],
                [
                    (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv,
                    (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
                    (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
                ],
            ],
        })
    }

    /// `F·Fᵀ`.
    pub fn left_cauchy_green(&self) -> SymTensor3 {
        SymTensor3::from_tensor(&(*self * self.transpose()))
    }

    /// `Fᵀ·F`.
    pub fn right_cauchy_green(&self) -> SymTensor3 {
        SymTensor3::from_tensor(&(self.transpose() * *self))
    }

    pub fn symmetric_part(&self) -> SymTensor3 {
        SymTensor3::from_tensor(self)
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn norm(&self) -> f64 {
        self.m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Add for SymTensor3 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        Self { c }
    }
}

impl AddAssign for SymTensor3 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for SymTensor3 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for SymTensor3 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            c: self.c.map(|v| v * s),
        }
    }
}

impl Add for Tensor3 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut m = self.m;
        for (row, other) in m.iter_mut().zip(&rhs.m) {
            for (a, b) in row.iter_mut().zip(other) {
                *a += b;
            }
        }
        Self { m }
    }
}

impl Sub for Tensor3 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + rhs * -1.0
    }
}

impl Mul<f64> for Tensor3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            m: self.m.map(|row| row.map(|v| v * s)),
        }
    }
}

impl Mul for Tensor3 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        Self { m }
    }
}

impl SpectralDecomp {
    /// `Q·diag(f(λ))·Qᵀ`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SymTensor3 {
        let d = self.values.map(f);
        let q = &self.frame;
        let mut c = [0.0; 6];
        for (slot, (i, j)) in [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)]
            .into_iter()
            .enumerate()
        {
            c[slot] = (0..3).map(|k| q.m[i][k] * d[k] * q.m[j][k]).sum();
        }
        SymTensor3 { c }
    }

    pub fn reconstruct(&self) -> SymTensor3 {
        self.map_values(|v| v)
    }

    /// Components of `A` in the eigenbasis: `Qᵀ·A·Q`.
    pub fn to_eigenbasis(&self, a: &SymTensor3) -> SymTensor3 {
        a.congruence(&self.frame.transpose())
    }

    /// Inverse of [`Self::to_eigenbasis`].
    pub fn from_eigenbasis(&self, a: &SymTensor3) -> SymTensor3 {
        a.congruence(&self.frame)
    }
}

/// Principal invariants `(I, II, III)` of a symmetric tensor.
pub fn invariants(a: &SymTensor3) -> (f64, f64, f64) {
    let inv = a.invariants();
    (inv.first, inv.second, inv.third)
}

/// Cyclic Jacobi eigen-decomposition of a symmetric tensor.
pub fn eig_sym(a: &SymTensor3) -> Result<SpectralDecomp, TensorError> {
    if !a.is_finite() {
        return Err(TensorError::NonFinite);
    }
    let mut m = a.to_tensor().m;
    let mut v = Tensor3::identity().m;
    let scale = a.norm();
    let off =
        |m: &[[f64; 3]; 3]| (2.0 * (m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2))).sqrt();

    let mut converged = scale == 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged || off(&m) <= JACOBI_TOLERANCE * scale {
            converged = true;
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = m[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
            let t = if theta.abs() > 1e150 {
                0.5 / theta
            } else {
                theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
            };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let tau = s / (1.0 + c);
            m[p][p] -= t * apq;
            m[q][q] += t * apq;
            m[p][q] = 0.0;
            m[q][p] = 0.0;
            let r = 3 - p - q;
            let g = m[r][p];
            let h = m[r][q];
            m[r][p] = g - s * (h + g * tau);
            m[p][r] = m[r][p];
            m[r][q] = h + s * (g - h * tau);
            m[q][r] = m[r][q];
            for row in v.iter_mut() {
                let g = row[p];
                let h = row[q];
                row[p] = g - s * (h + g * tau);
                row[q] = h + s * (g - h * tau);
            }
        }
    }
    if !converged && off(&m) > JACOBI_TOLERANCE * scale {
        return Err(TensorError::NoConvergence(JACOBI_MAX_SWEEPS));
    }

    let vt = Tensor3 { m: v };
    let mut pairs: Vec<(f64, [f64; 3])> = (0..3).map(|k| (m[k][k], vt.column(k))).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));

    let canon = |mut e: [f64; 3]| {
        let mut big = 0;
        for k in 1..3 {
            if e[k].abs() > e[big].abs() {
                big = k;
            }
        }
        if e[big] < 0.0 {
            e = e.map(|x| -x);
        }
        e
    };
    let e0 = canon(pairs[0].1);
    let e1 = canon(pairs[1].1);
    let e2 = cross(e0, e1);

    Ok(SpectralDecomp {
        values: [pairs[0].0, pairs[1].0, pairs[2].0],
        frame: Tensor3::from_columns(e0, e1, e2),
    })
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn spd_check(values: &[f64; 3]) -> Result<(), TensorError> {
    // values are sorted descending
    if values[0] > 0.0 && values[2] > SPD_RATIO * values[0] {
        Ok(())
    } else {
        Err(TensorError::NotSpd(*values))
    }
}

/// An SPD tensor together with its spectral decomposition.
///
/// Computing the decomposition once lets the square root, its inverse and
/// the Sylvester solve share one eigen-solve.
#[derive(Debug, Clone, Copy)]
pub struct SpdFactor {
    decomp: SpectralDecomp,
}

impl SpdFactor {
    pub fn new(a: &SymTensor3) -> Result<Self, TensorError> {
        let decomp = eig_sym(a)?;
        spd_check(&decomp.values)?;
        Ok(Self { decomp })
    }

    pub fn decomp(&self) -> &SpectralDecomp {
        &self.decomp
    }

    pub fn sqrt(&self) -> SymTensor3 {
        self.decomp.map_values(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> SymTensor3 {
        self.decomp.map_values(|v| 1.0 / v.sqrt())
    }

    pub fn inverse(&self) -> SymTensor3 {
        self.decomp.map_values(|v| 1.0 / v)
    }

    /// Solves `A·X + X·A = M` for symmetric `X`.
    pub fn solve_sylvester(&self, m: &SymTensor3) -> SymTensor3 {
        let mt = self.decomp.to_eigenbasis(m);
        let a = self.decomp.values;
        let mut x = [0.0; 6];
        for (slot, (i, j)) in [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)]
            .into_iter()
            .enumerate()
        {
            x[slot] = mt.get(i, j) / (a[i] + a[j]);
        }
        self.decomp.from_eigenbasis(&SymTensor3 { c: x })
    }
}

/// Principal square root of an SPD tensor.
pub fn sqrt_spd(a: &SymTensor3) -> Result<SymTensor3, TensorError> {
    Ok(SpdFactor::new(a)?.sqrt())
}

/// Solves `A·X + X·A = M` for symmetric `X`, `A` SPD.
pub fn sylvester_spd(a: &SymTensor3, m: &SymTensor3) -> Result<SymTensor3, TensorError> {
    Ok(SpdFactor::new(a)?.solve_sylvester(m))
}

/// Oldroyd (upper-convected) rate `Ȧ − L·A − A·Lᵀ`.
pub fn oldroyd(a_dot: &SymTensor3, l: &Tensor3, a: &SymTensor3) -> SymTensor3 {
    let la = *l * a.to_tensor();
    // L·A + A·Lᵀ = L·A + (L·A)ᵀ
    *a_dot - SymTensor3::from_tensor(&la) * 2.0
}
