//! Assembly of the first and second derivatives of the trajectory level.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::corrector::{CorrectorSpec, RectangleCase};
use crate::error::{Error, Result};
use crate::forms::{norm_pow, Assembly, ProblemKind, ProblemSpec, Terms};
use crate::kinematics::{one_dimensional_check, DeformationField};
use crate::quadrature::QuadratureRule;

/// Which closed form of the deformation sum was used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FastPath {
    Generic,
    OneDimensional,
    Planar,
}

impl FastPath {
    pub fn as_str(&self) -> &'static str {
        match self {
            FastPath::Generic => "generic",
            FastPath::OneDimensional => "one_dimensional",
            FastPath::Planar => "planar",
        }
    }
}

/// Why no finite line-optimized value was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    /// `⟨v,v⟩₀ = 0` and `Q[v] = 0`: the corrector contributes nothing.
    NoCorrection,
    /// `⟨v,v⟩₀ = 0` and `Q[v] ≠ 0`: the trajectory value is unbounded below along the line.
    UnboundedBelow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrderOptions {
    pub first_order_tol: f64,
    /// Reject non-stationary deformations. When false the Lane–Emden
    /// assembly proceeds without `ṁ(0) = 0`; the eigenvalue problem always requires it.
    pub require_stationary: bool,
    /// Force a deformation-sum formula instead of auto-detection.
    pub fast_path: Option<FastPath>,
    /// Relative threshold below which `⟨v,v⟩₀` and `Q[v]` count as zero.
    pub degenerate_tol: f64,
}

impl Default for SecondOrderOptions {
    fn default() -> Self {
        Self {
            first_order_tol: 1e-8,
            require_stationary: true,
            fast_path: None,
            degenerate_tol: 1e-12,
        }
    }
}

/// Everything computed for one (problem, deformation, corrector) triple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub problem: ProblemKind,
    pub corrector: String,
    /// `ν̇(0)` or `ṁ(0)`.
    pub first_order: f64,
    /// Line-optimized `ν̈(0)` or `m̈(0)`; NaN when [`Degeneracy::UnboundedBelow`].
    pub second_order: f64,
    /// Value with the corrector taken as given (`γ = 1`).
    pub second_order_unscaled: f64,
    pub q_u: f64,
    pub q_v: f64,
    pub vv0: f64,
    /// `−Q[v]/⟨v,v⟩₀`; NaN when degenerate.
    pub gamma_star: f64,
    pub fast_path: FastPath,
    pub degeneracy: Option<Degeneracy>,
    /// `p/∫|u|^p` for the eigenvalue problem, 1 for Lane–Emden.
    pub prefactor: f64,
    /// Corrector-free part of the bracket.
    pub base: f64,
    /// Some Jacobian was obtained by finite differences.
    pub fd_jacobian: bool,
    pub terms: Terms,
}

impl DerivativeReport {
    /// Second derivative along the trajectory with corrector `γv`.
    pub fn trajectory_value(&self, gamma: f64) -> f64 {
        self.prefactor * (self.base + 2.0 * gamma * self.q_v + gamma * gamma * self.vv0)
    }
}

fn prefactor_and_mass(spec: &ProblemSpec, asm: &Assembly) -> Result<f64> {
    match spec.kind {
        ProblemKind::Eigenvalue => {
            let (mass, _) = asm.power_moments(spec.p)?;
            if !(mass > 0.0) {
                return Err(Error::Precondition("ground state has zero mass".into()));
            }
            Ok(spec.p / mass)
        }
        ProblemKind::LaneEmden => Ok(1.0),
    }
}

/// `ν̇(0)` (eigenvalue) or `ṁ(0)` (Lane–Emden).
pub fn first_order(spec: &ProblemSpec, field: &DeformationField, rule: &QuadratureRule) -> Result<f64> {
    let asm = Assembly::new(spec, field, rule);
    let (raw, _) = asm.first_order_raw()?;
    Ok(prefactor_and_mass(spec, &asm)? * raw)
}

/// Boundary form `−(p−1)/∫|u|^p · ∫_{∂Ω}|Du|^p (R,n) dσ` of `ν̇(0)` on the rectangle.
pub fn pohozaev_first_order(spec: &ProblemSpec, field: &DeformationField, rule: &QuadratureRule) -> Result<f64> {
    if spec.kind != ProblemKind::Eigenvalue {
        return Err(Error::Unsupported(
            "the boundary form is implemented for the eigenvalue problem only".into(),
        ));
    }
    let u = &spec.u;
    let boundary = rule.boundary().integrate(|bp| norm_pow(u.gradient(bp.point), spec.p) * field.r(bp.point).dot(&bp.normal));
    let values: Vec<f64> = rule.nodes().iter().map(|&x| u.value(x).abs().powf(spec.p)).collect();
    let mass = rule.integrate_values(&values)?;
    Ok(-(spec.p - 1.0) / mass * boundary)
}

/// Line-optimized second derivative with default options.
pub fn second_order(
    spec: &ProblemSpec,
    field: &DeformationField,
    rule: &QuadratureRule,
    corrector: &CorrectorSpec,
) -> Result<DerivativeReport> {
    second_order_with(spec, field, rule, corrector, &SecondOrderOptions::default())
}

pub fn second_order_with(
    spec: &ProblemSpec,
    field: &DeformationField,
    rule: &QuadratureRule,
    corrector: &CorrectorSpec,
    opts: &SecondOrderOptions,
) -> Result<DerivativeReport> {
    let asm = Assembly::new(spec, field, rule);
    let mut terms = Terms::new();
    let prefactor = prefactor_and_mass(spec, &asm)?;

    let (raw_first, first_terms) = asm.first_order_raw()?;
    terms.extend(first_terms);
    let first = prefactor * raw_first;
    let must_be_stationary = opts.require_stationary || spec.kind == ProblemKind::Eigenvalue;
    if must_be_stationary && !(first.abs() <= opts.first_order_tol) {
        return Err(Error::Precondition(format!(
            "first-order derivative {first:e} exceeds tolerance {:e}; the second-order formula needs a stationary deformation",
            opts.first_order_tol
        )));
    }

    // deformation sum
    let (generic, d_terms) = asm.deformation_generic()?;
    terms.extend(d_terms);
    terms.insert("d_generic".into(), generic);
    let auto = if field.has_rtilde() {
        FastPath::Generic
    } else if one_dimensional_check(field, rule.a()) {
        FastPath::OneDimensional
    } else {
        FastPath::Planar
    };
    let fast_path = opts.fast_path.unwrap_or(auto);
    if fast_path != FastPath::Generic && field.has_rtilde() {
        return Err(Error::Precondition(format!(
            "the {} deformation sum assumes R~ = 0",
            fast_path.as_str()
        )));
    }
    let d = match fast_path {
        FastPath::Generic => generic,
        FastPath::OneDimensional => {
            let v = asm.deformation_one_dimensional()?;
            terms.insert("d_one_dimensional".into(), v);
            v
        }
        FastPath::Planar => {
            let v = asm.deformation_planar()?;
            terms.insert("d_planar".into(), v);
            v
        }
    };

    let (q_u, qu_terms) = asm.q_terms(&asm.u)?;
    for (k, v) in qu_terms {
        terms.insert(format!("q_u.{k}"), v);
    }

    let mut base = d;
    let mut projected_coeff = 0.0;
    if spec.kind == ProblemKind::LaneEmden {
        let uu = asm.inner0(&asm.u, &asm.u)?;
        if uu == 0.0 {
            return Err(Error::Invariant("<u,u>_0 vanishes for a Lane-Emden ground state".into()));
        }
        terms.insert("uu0".into(), uu);
        terms.insert("qu_squared_over_uu".into(), q_u * q_u / uu);
        let q = spec.q.expect("lane-emden");
        let (mq, mq_div) = asm.power_moments(q)?;
        terms.insert("stationary_qu_squared_over_uu".into(), -(q - spec.p) / (q * q) * mq_div * mq_div / mq);
        base -= q_u * q_u / uu;
        if let Some(v) = corrector.field() {
            let vs = asm.sample(v.as_ref());
            projected_coeff = asm.inner0(&asm.u, &vs)? / uu;
            terms.insert("uv0".into(), projected_coeff * uu);
        }
    }
    terms.insert("base".into(), base);

    // corrector contribution
    let (q_v, vv0, scale_v) = match corrector.field() {
        Some(v) => {
            let raw = asm.sample(v.as_ref());
            let vs = if projected_coeff != 0.0 {
                raw.combine(1.0, &asm.u, -projected_coeff)
            } else {
                raw
            };
            let (q_v, qv_terms) = asm.q_terms(&vs)?;
            for (k, val) in qv_terms {
                terms.insert(format!("q_v.{k}"), val);
            }
            let form = asm.inner0_terms(&vs, &vs)?;
            for (k, val) in &form.breakdown {
                terms.insert(format!("vv0.{k}"), *val);
            }
            let scale: f64 = form.breakdown.values().map(|x| x.abs()).sum();
            (q_v, form.value, scale)
        }
        None => analytic_corrector(spec, field, corrector)?,
    };

    let reference: f64 = terms
        .iter()
        .filter(|(k, _)| k.starts_with("d_") && k.as_str() != "d_generic")
        .map(|(_, v)| v.abs())
        .sum::<f64>()
        .max(base.abs())
        .max(f64::MIN_POSITIVE);
    let vv_zero = scale_v == 0.0 || vv0.abs() <= opts.degenerate_tol * scale_v;
    let q_zero = q_v.abs() <= opts.degenerate_tol * (scale_v * reference).sqrt();

    let unscaled = prefactor * (base + 2.0 * q_v + vv0);
    let (second, gamma_star, degeneracy) = if vv_zero {
        if q_zero {
            (prefactor * base, f64::NAN, Some(Degeneracy::NoCorrection))
        } else {
            (f64::NAN, f64::NAN, Some(Degeneracy::UnboundedBelow))
        }
    } else if vv0 < 0.0 {
        return Err(Error::Invariant(format!(
            "<v,v>_0 = {vv0:e} is negative after projection"
        )));
    } else {
        (prefactor * (base - q_v * q_v / vv0), -q_v / vv0, None)
    };

    Ok(DerivativeReport {
        problem: spec.kind,
        corrector: corrector.id(),
        first_order: first,
        second_order: second,
        second_order_unscaled: unscaled,
        q_u,
        q_v,
        vv0,
        gamma_star,
        fast_path,
        degeneracy,
        prefactor,
        base,
        fd_jacobian: field.uses_fd_jacobian(),
        terms,
    })
}

/// `(Q[w], ⟨w,w⟩₀, scale)` for the closed-form optimal corrector.
fn analytic_corrector(
    spec: &ProblemSpec,
    field: &DeformationField,
    corrector: &CorrectorSpec,
) -> Result<(f64, f64, f64)> {
    let (case, ww0) = match (corrector.analytic_case(), corrector.analytic_ww0()) {
        (Some(c), Some(w)) => (c, w),
        _ => return Err(Error::Precondition(format!("corrector {} has no field", corrector.id()))),
    };
    if spec.kind != ProblemKind::Eigenvalue || spec.p != 2.0 {
        return Err(Error::Unsupported(
            "the closed-form optimal corrector exists for the p = 2 eigenvalue problem only".into(),
        ));
    }
    let a = corrector.height().expect("analytic correctors carry their height");
    let expected = case.deformation(a);
    if field.separable() != expected.separable() {
        return Err(Error::Unsupported(format!(
            "closed-form corrector for case {} does not match the deformation field",
            case.id()
        )));
    }
    // Q[w] = ⟨w,w⟩₀; both scale with c² for the ground state c·sin(πx)cos(πy/2a)
    let mass = spec.u.value(crate::Vec2::new(0.5, 0.0)).powi(2);
    Ok((ww0 * mass, ww0 * mass, ww0.abs() * mass))
}

/// `∫u_x²(f′θ)² + ∫u_x²(fθ′)²` in closed form for cases (iv) and (v).
pub fn closed_form_first_term(case: RectangleCase, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("half-height must be positive, got {a}")));
    }
    match case {
        RectangleCase::Iv => Ok(PI.powi(4) / 64.0 * (a + 3.0 / a)),
        RectangleCase::V => Ok(PI * PI * (2.0 * PI * PI + 8.0 * a * a + 3.0) / (64.0 * a)),
        other => Err(Error::Unsupported(format!(
            "no closed-form first term for case {}",
            other.id()
        ))),
    }
}
