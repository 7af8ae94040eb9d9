//! Closed-form Dirichlet eigenpairs of `−Δ` on `(0,1)×(−a,a)`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{FieldRef, ScalarField};
use crate::{Mat2, Vec2};

fn check_height(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("half-height must be positive, got {a}")))
    }
}

/// `λ₁ = π² + (π/2a)²`.
pub fn lambda1(a: f64) -> Result<f64> {
    lambda(1, 1, a)
}

/// `λ_{m,k} = m²π² + (kπ/2a)²`.
pub fn lambda(m: usize, k: usize, a: f64) -> Result<f64> {
    check_height(a)?;
    check_index(m, k)?;
    let (mf, kf) = (m as f64, k as f64);
    Ok(mf * mf * PI * PI + (kf * PI / (2.0 * a)).powi(2))
}

fn check_index(m: usize, k: usize) -> Result<()> {
    if m == 0 || k == 0 {
        return Err(Error::Index(format!("eigen-indices start at 1, got ({m}, {k})")));
    }
    Ok(())
}

/// Normalized `φ_{m,k}`: `√(2/a) sin(mπx) cos(kπy/2a)` for odd `k`,
/// `√(2/a) sin(mπx) sin(kπy/2a)` for even `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenfunction {
    pub m: usize,
    pub k: usize,
    pub a: f64,
}

impl Eigenfunction {
    fn parts(&self, p: Vec2) -> (f64, f64, f64, f64, f64, f64) {
        let wx = self.m as f64 * PI;
        let wy = self.k as f64 * PI / (2.0 * self.a);
        let (sx, cx) = (wx * p.x).sin_cos();
        let (sy, cy) = (wy * p.y).sin_cos();
        // y-factor and its derivative
        let (ty, dty) = if self.k % 2 == 1 {
            (cy, -wy * sy)
        } else {
            (sy, wy * cy)
        };
        (sx, wx * cx, ty, dty, wx, wy)
    }

    pub fn lambda(&self) -> f64 {
        lambda(self.m, self.k, self.a).expect("validated at construction")
    }
}

impl ScalarField for Eigenfunction {
    fn value(&self, p: Vec2) -> f64 {
        let (sx, _, ty, _, _, _) = self.parts(p);
        (2.0 / self.a).sqrt() * sx * ty
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        let (sx, dsx, ty, dty, _, _) = self.parts(p);
        (2.0 / self.a).sqrt() * Vec2::new(dsx * ty, sx * dty)
    }

    fn hessian(&self, p: Vec2) -> Option<Mat2> {
        let (sx, dsx, ty, dty, wx, wy) = self.parts(p);
        let n = (2.0 / self.a).sqrt();
        Some(n * Mat2::new(-wx * wx * sx * ty, dsx * dty, dsx * dty, -wy * wy * sx * ty))
    }

    fn label(&self) -> String {
        format!("phi_{}_{}", self.m, self.k)
    }
}

pub fn eigenfunction(m: usize, k: usize, a: f64) -> Result<Eigenfunction> {
    check_index(m, k)?;
    check_height(a)?;
    Ok(Eigenfunction { m, k, a })
}

/// The unnormalized ground state `c·sin(πx)cos(πy/2a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundState {
    pub a: f64,
    pub scale: f64,
}

impl GroundState {
    pub fn new(a: f64) -> Result<Self> {
        check_height(a)?;
        Ok(Self { a, scale: 1.0 })
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    /// `u_x, u_y, u_xx, u_xy, u_yy` at `p`.
    pub fn derivatives(&self, p: Vec2) -> [f64; 5] {
        let g = self.gradient(p);
        let h = self.hessian(p).expect("analytic");
        [g.x, g.y, h[(0, 0)], h[(0, 1)], h[(1, 1)]]
    }
}

impl ScalarField for GroundState {
    fn value(&self, p: Vec2) -> f64 {
        let wy = PI / (2.0 * self.a);
        self.scale * (PI * p.x).sin() * (wy * p.y).cos()
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        let wy = PI / (2.0 * self.a);
        let (sx, cx) = (PI * p.x).sin_cos();
        let (sy, cy) = (wy * p.y).sin_cos();
        self.scale * Vec2::new(PI * cx * cy, -wy * sx * sy)
    }

    fn hessian(&self, p: Vec2) -> Option<Mat2> {
        let wy = PI / (2.0 * self.a);
        let (sx, cx) = (PI * p.x).sin_cos();
        let (sy, cy) = (wy * p.y).sin_cos();
        let xy = -PI * wy * cx * sy;
        Some(self.scale * Mat2::new(-PI * PI * sx * cy, xy, xy, -wy * wy * sx * cy))
    }

    fn label(&self) -> String {
        if self.scale == 1.0 {
            "u".to_string()
        } else {
            format!("{}*u", self.scale)
        }
    }
}

pub fn ground_state(a: f64) -> Result<GroundState> {
    GroundState::new(a)
}

/// Eigen-data of one rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectangleSpectrum {
    pub a: f64,
}

impl RectangleSpectrum {
    pub fn new(a: f64) -> Result<Self> {
        check_height(a)?;
        Ok(Self { a })
    }

    pub fn lambda1(&self) -> f64 {
        lambda1(self.a).expect("validated")
    }

    pub fn lambda(&self, m: usize, k: usize) -> Result<f64> {
        lambda(m, k, self.a)
    }

    pub fn eigenfunction(&self, m: usize, k: usize) -> Result<Eigenfunction> {
        eigenfunction(m, k, self.a)
    }

    pub fn eigenfunction_ref(&self, m: usize, k: usize) -> Result<FieldRef> {
        Ok(Arc::new(self.eigenfunction(m, k)?))
    }

    pub fn ground_state(&self) -> GroundState {
        GroundState::new(self.a).expect("validated")
    }
}
