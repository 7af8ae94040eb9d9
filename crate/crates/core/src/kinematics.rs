//! Perturbation fields `R`, `R̃` and the t-derivatives of the pullback
//! coefficients `φ_t = det DΦ_t` and `Ψ_t = (DΦ_t)⁻¹` at `t = 0`.
//!
//! Matrix convention: `(DR)_{ij} = ∂R_i/∂x_j`. A gradient `Du` is a row
//! vector, so `Du·DR` is stored as the column vector `DRᵀ Du`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Mat2, Vec2};

/// Relative step of the central-difference Jacobian fallback.
pub const FD_JACOBIAN_STEP: f64 = 1e-6;

/// One-variable profile used to build separable shears `R = (f(x)θ(y), 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Zero,
    Constant(f64),
    /// `s ↦ s`
    Linear,
    /// `s ↦ sin(ω s)`
    Sin { omega: f64 },
    /// `s ↦ 1 − cos(ω s)`
    OneMinusCos { omega: f64 },
}

impl Profile {
    /// `sin(πx/2)`, the `f` of cases (i) and (iv).
    pub fn sin_half_pi() -> Self {
        Profile::Sin { omega: PI / 2.0 }
    }

    /// `1 − cos(πx/2)`, the `f` of cases (iii) and (vi).
    pub fn one_minus_cos_half_pi() -> Self {
        Profile::OneMinusCos { omega: PI / 2.0 }
    }

    /// `sin(πy/2a)`, the `θ` of cases (iv)–(vi).
    pub fn sin_over_height(a: f64) -> Self {
        Profile::Sin {
            omega: PI / (2.0 * a),
        }
    }

    /// Value, first and second derivative at `s`.
    pub fn eval(&self, s: f64) -> [f64; 3] {
        match *self {
            Profile::Zero => [0.0; 3],
            Profile::Constant(c) => [c, 0.0, 0.0],
            Profile::Linear => [s, 1.0, 0.0],
            Profile::Sin { omega } => {
                let (sn, cs) = (omega * s).sin_cos();
                [sn, omega * cs, -omega * omega * sn]
            }
            Profile::OneMinusCos { omega } => {
                let (sn, cs) = (omega * s).sin_cos();
                [1.0 - cs, omega * sn, omega * omega * cs]
            }
        }
    }

    /// True for profiles that are odd about `s = 0`.
    pub fn is_odd(&self) -> bool {
        matches!(self, Profile::Zero | Profile::Linear | Profile::Sin { .. })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Zero) || matches!(self, Profile::Constant(c) if *c == 0.0)
    }
}

/// A smooth vector field on the plane. Fields without an analytic Jacobian
/// return `None` from [`VectorField::jacobian`] and are differentiated by
/// central differences.
pub trait VectorField: Send + Sync {
    fn value(&self, p: Vec2) -> Vec2;

    fn jacobian(&self, _p: Vec2) -> Option<Mat2> {
        None
    }
}

/// `R(x, y) = (f(x) θ(y), 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableShear {
    pub f: Profile,
    pub theta: Profile,
}

impl VectorField for SeparableShear {
    fn value(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.f.eval(p.x)[0] * self.theta.eval(p.y)[0], 0.0)
    }

    fn jacobian(&self, p: Vec2) -> Option<Mat2> {
        let [f, fp, _] = self.f.eval(p.x);
        let [th, thp, _] = self.theta.eval(p.y);
        Some(Mat2::new(fp * th, f * thp, 0.0, 0.0))
    }
}

struct ZeroVectorField;

impl VectorField for ZeroVectorField {
    fn value(&self, _p: Vec2) -> Vec2 {
        Vec2::zeros()
    }

    fn jacobian(&self, _p: Vec2) -> Option<Mat2> {
        Some(Mat2::zeros())
    }
}

type VecFn = dyn Fn(Vec2) -> Vec2 + Send + Sync;
type JacFn = dyn Fn(Vec2) -> Mat2 + Send + Sync;

/// A vector field given by closures; the Jacobian closure is optional.
pub struct FnVectorField {
    value: Box<VecFn>,
    jacobian: Option<Box<JacFn>>,
}

impl FnVectorField {
    pub fn new(value: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> Self {
        Self {
            value: Box::new(value),
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(Vec2) -> Mat2 + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Box::new(jac));
        self
    }
}

impl VectorField for FnVectorField {
    fn value(&self, p: Vec2) -> Vec2 {
        (self.value)(p)
    }

    fn jacobian(&self, p: Vec2) -> Option<Mat2> {
        self.jacobian.as_ref().map(|j| j(p))
    }
}

/// Central-difference Jacobian of `field` at `p` with step `h`.
pub fn fd_jacobian(field: &dyn VectorField, p: Vec2, h: f64) -> Mat2 {
    let mut jac = Mat2::zeros();
    for j in 0..2 {
        let mut e = Vec2::zeros();
        e[j] = h;
        let col = (field.value(p + e) - field.value(p - e)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// The perturbation `Φ_t(x) = x + tR(x) + ½t²R̃(x)`.
#[derive(Clone)]
pub struct DeformationField {
    r: Arc<dyn VectorField>,
    rtilde: Option<Arc<dyn VectorField>>,
    shear: Option<SeparableShear>,
    fd_scale: f64,
}

impl fmt::Debug for DeformationField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeformationField")
            .field("shear", &self.shear)
            .field("has_rtilde", &self.rtilde.is_some())
            .finish()
    }
}

impl DeformationField {
    pub fn new(r: impl VectorField + 'static) -> Self {
        Self {
            r: Arc::new(r),
            rtilde: None,
            shear: None,
            fd_scale: 1.0,
        }
    }

    pub fn zero() -> Self {
        Self::new(ZeroVectorField)
    }

    /// `R = (f(x)θ(y), 0)`, `R̃ = 0`.
    pub fn shear(f: Profile, theta: Profile) -> Self {
        let shear = SeparableShear { f, theta };
        Self {
            r: Arc::new(shear),
            rtilde: None,
            shear: Some(shear),
            fd_scale: 1.0,
        }
    }

    pub fn with_rtilde(mut self, rtilde: impl VectorField + 'static) -> Self {
        self.rtilde = Some(Arc::new(rtilde));
        self
    }

    /// Length scale for the finite-difference fallback step.
    pub fn with_fd_scale(mut self, scale: f64) -> Self {
        self.fd_scale = scale;
        self
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn separable(&self) -> Option<&SeparableShear> {
        self.shear.as_ref()
    }

    pub fn has_rtilde(&self) -> bool {
        self.rtilde.is_some()
    }

    /// True when `R` or `R̃` is differentiated numerically.
    pub fn uses_fd_jacobian(&self) -> bool {
        let p = Vec2::new(0.5, 0.0);
        self.r.jacobian(p).is_none()
            || self.rtilde.as_ref().is_some_and(|rt| rt.jacobian(p).is_none())
    }

    pub fn r(&self, p: Vec2) -> Vec2 {
        self.r.value(p)
    }

    pub fn rtilde(&self, p: Vec2) -> Vec2 {
        self.rtilde.as_ref().map_or_else(Vec2::zeros, |rt| rt.value(p))
    }

    pub fn dr(&self, p: Vec2) -> Mat2 {
        self.r
            .jacobian(p)
            .unwrap_or_else(|| fd_jacobian(self.r.as_ref(), p, FD_JACOBIAN_STEP * self.fd_scale))
    }

    pub fn drtilde(&self, p: Vec2) -> Mat2 {
        match &self.rtilde {
            None => Mat2::zeros(),
            Some(rt) => rt
                .jacobian(p)
                .unwrap_or_else(|| fd_jacobian(rt.as_ref(), p, FD_JACOBIAN_STEP * self.fd_scale)),
        }
    }

    /// `Φ_t(p)`.
    pub fn map(&self, p: Vec2, t: f64) -> Vec2 {
        p + t * self.r(p) + 0.5 * t * t * self.rtilde(p)
    }

    /// `DΦ_t(p) = I + t DR + ½t² DR̃`.
    pub fn jacobian_t(&self, p: Vec2, t: f64) -> Mat2 {
        Mat2::identity() + t * self.dr(p) + 0.5 * t * t * self.drtilde(p)
    }
}

/// Sum of the 2×2 principal minors of a square matrix.
pub fn chi2(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "chi2 needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    if n < 2 {
        return Err(Error::Dimension(format!("chi2 needs N >= 2, got N = {n}")));
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += m[(i, i)] * m[(j, j)] - m[(i, j)] * m[(j, i)];
        }
    }
    Ok(acc)
}

#[inline]
pub(crate) fn chi2_2d(m: &Mat2) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// `φ̇₀, φ̈₀, Ψ̇₀, Ψ̈₀` at one point, for any dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicDerivatives {
    /// `div R`
    pub phi0dot: f64,
    /// `2χ₂(DR) + div R̃`
    pub phi0ddot: f64,
    /// `−DR`
    pub psi0dot: DMatrix<f64>,
    /// `2 DR·DR − DR̃`
    pub psi0ddot: DMatrix<f64>,
    pub chi2: f64,
    pub det_dr: f64,
}

impl KinematicDerivatives {
    pub fn from_jacobians(dr: &DMatrix<f64>, drt: &DMatrix<f64>) -> Result<Self> {
        if dr.shape() != drt.shape() {
            return Err(Error::Dimension(format!(
                "DR is {:?} but DR~ is {:?}",
                dr.shape(),
                drt.shape()
            )));
        }
        let chi2 = chi2(dr)?;
        Ok(Self {
            phi0dot: dr.trace(),
            phi0ddot: 2.0 * chi2 + drt.trace(),
            psi0dot: -dr,
            psi0ddot: 2.0 * dr * dr - drt,
            chi2,
            det_dr: dr.determinant(),
        })
    }

    /// Second-order Taylor model of `φ_t`.
    pub fn phi_taylor(&self, t: f64) -> f64 {
        1.0 + t * self.phi0dot + 0.5 * t * t * self.phi0ddot
    }

    /// Second-order Taylor model of `Ψ_t`.
    pub fn psi_taylor(&self, t: f64) -> DMatrix<f64> {
        let n = self.psi0dot.nrows();
        DMatrix::identity(n, n) + t * &self.psi0dot + 0.5 * t * t * &self.psi0ddot
    }
}

/// Exact `φ_t` and `Ψ_t` from the Jacobians, any dimension.
pub fn exact_phi_psi(dr: &DMatrix<f64>, drt: &DMatrix<f64>, t: f64) -> Result<(f64, DMatrix<f64>)> {
    let n = dr.nrows();
    let jac = DMatrix::identity(n, n) + t * dr + 0.5 * t * t * drt;
    let det = jac.determinant();
    let inv = jac
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("I + tDR + t²DR~/2 is singular at t = {t}")))?;
    Ok((det, inv))
}

/// Kinematic derivatives of `field` at `x`.
pub fn evaluate_kinematics(field: &DeformationField, x: Vec2) -> KinematicDerivatives {
    let dr = to_dmatrix(&field.dr(x));
    let drt = to_dmatrix(&field.drtilde(x));
    KinematicDerivatives::from_jacobians(&dr, &drt).expect("2x2 jacobians are square")
}

pub(crate) fn to_dmatrix(m: &Mat2) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 2, m.as_slice())
}

/// True iff all but the first component of `R` vanish on a 16×16 sample
/// grid of `(0,1)×(−a,a)`.
pub fn one_dimensional_check(field: &DeformationField, a: f64) -> bool {
    const N: usize = 16;
    const THRESHOLD: f64 = 1e-12;
    (0..N).all(|i| {
        (0..N).all(|j| {
            let p = Vec2::new(
                i as f64 / (N - 1) as f64,
                -a + 2.0 * a * j as f64 / (N - 1) as f64,
            );
            field.r(p).y.abs() <= THRESHOLD
        })
    })
}
