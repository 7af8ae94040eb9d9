//! First- and second-order upper estimates for domain-perturbed least-energy
//! levels along Nehari manifold trajectories.
//!
//! Two problems are covered: the first Dirichlet eigenvalue of the
//! p-Laplacian and the Lane–Emden ground-state energy
//! `E[w] = (1/p)∫|Dw|^p − (1/q)∫|w|^q`. The domain is deformed by
//! `Φ_t(x) = x + tR(x) + ½t²R̃(x)` and every quantity is pulled back to the
//! reference rectangle `(0,1)×(−a,a)`.
//!
//! Module map:
//! - [`kinematics`]: perturbation fields and the t-derivatives of `det DΦ_t` and `(DΦ_t)⁻¹`.
//! - [`quadrature`]: tensor-product panel Gauss rules on the rectangle.
//! - [`field`]: scalar fields with gradients (ground states, correctors, test functions).
//! - [`spectral`]: closed-form Dirichlet eigenpairs of the rectangle.
//! - [`forms`]: the second variation `⟨g,h⟩₀`, the coupling functional `Q[h]`, Nehari scaling.
//! - [`shapederiv`]: assembly of the first and second derivatives into a [`DerivativeReport`].
//! - [`corrector`]: the corrector catalog, including truncated Fourier optimal correctors.
//! - [`oracle`]: finite differences in t, a pulled-back grid eigensolver and a Lane–Emden solver.

pub mod corrector;
pub mod error;
pub mod field;
pub mod forms;
pub mod kinematics;
pub mod oracle;
pub mod quadrature;
pub mod shapederiv;
pub mod spectral;

pub use corrector::{CorrectorKind, CorrectorSpec, RectangleCase};
pub use error::{Error, Result};
pub use field::{FieldRef, ScalarField};
pub use forms::{ProblemKind, ProblemSpec};
pub use kinematics::{DeformationField, Profile};
pub use quadrature::QuadratureRule;
pub use shapederiv::{DerivativeReport, FastPath, SecondOrderOptions};

/// Points and gradients on the plane.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2×2 matrices (Jacobians, inverse Jacobians).
pub type Mat2 = nalgebra::Matrix2<f64>;

/// C-style `%.12e`: twelve fractional digits, signed two-digit exponent.
pub fn format_sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}
