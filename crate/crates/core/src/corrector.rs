//! The corrector catalog for the rectangle: `yu`, basis eigenfunctions,
//! truncated Fourier optimal correctors `w_{M,K}` and closed-form `⟨w,w⟩₀`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Combination, FieldRef, ScalarField, TimesY};
use crate::forms::{ProblemKind, ProblemSpec};
use crate::kinematics::{DeformationField, Profile, SeparableShear};
use crate::quadrature::QuadratureRule;
use crate::spectral::{eigenfunction, lambda};
use crate::{format_sci, Vec2};

/// Default truncation of the Fourier optimal corrector.
pub const DEFAULT_TRUNCATION: usize = 20;

/// The six rectangle deformations `R = (f(x)θ(y), 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RectangleCase {
    I,
    Ii,
    Iii,
    Iv,
    V,
    Vi,
}

impl RectangleCase {
    pub fn all() -> [RectangleCase; 6] {
        use RectangleCase::*;
        [I, Ii, Iii, Iv, V, Vi]
    }

    pub fn id(&self) -> &'static str {
        match self {
            RectangleCase::I => "i",
            RectangleCase::Ii => "ii",
            RectangleCase::Iii => "iii",
            RectangleCase::Iv => "iv",
            RectangleCase::V => "v",
            RectangleCase::Vi => "vi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::all().into_iter().find(|c| c.id() == s.trim().to_ascii_lowercase())
    }

    pub fn f(&self) -> Profile {
        match self {
            RectangleCase::I | RectangleCase::Iv => Profile::sin_half_pi(),
            RectangleCase::Ii | RectangleCase::V => Profile::Linear,
            RectangleCase::Iii | RectangleCase::Vi => Profile::one_minus_cos_half_pi(),
        }
    }

    pub fn theta(&self, a: f64) -> Profile {
        match self {
            RectangleCase::I | RectangleCase::Ii | RectangleCase::Iii => Profile::Linear,
            _ => Profile::sin_over_height(a),
        }
    }

    pub fn deformation(&self, a: f64) -> DeformationField {
        DeformationField::shear(self.f(), self.theta(a))
    }
}

/// One coefficient `v_{m,k}` of a truncated optimal corrector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierCoefficient {
    pub m: usize,
    pub k: usize,
    pub lambda: f64,
    /// `λ_{m,k} − λ_{1,1}`
    pub gap: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorKind {
    YTimesU,
    Eigenmode { m: usize, k: usize },
    FourierOptimal { m_max: usize, k_max: usize },
    AnalyticOptimal { case: RectangleCase, a: f64 },
    User { label: String },
}

/// A corrector with its resolved field.
#[derive(Clone)]
pub struct CorrectorSpec {
    pub kind: CorrectorKind,
    field: Option<FieldRef>,
    coefficients: Vec<FourierCoefficient>,
    analytic_ww0: Option<f64>,
}

impl std::fmt::Debug for CorrectorSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorrectorSpec")
            .field("kind", &self.kind)
            .field("coefficients", &self.coefficients.len())
            .field("analytic_ww0", &self.analytic_ww0)
            .finish()
    }
}

impl CorrectorSpec {
    /// `v = y·u`.
    pub fn y_times_u(spec: &ProblemSpec) -> Self {
        Self {
            kind: CorrectorKind::YTimesU,
            field: Some(Arc::new(TimesY(spec.u.clone()))),
            coefficients: Vec::new(),
            analytic_ww0: None,
        }
    }

    /// `v = φ_{m,k}`.
    pub fn eigenmode(m: usize, k: usize, a: f64) -> Result<Self> {
        Ok(Self {
            kind: CorrectorKind::Eigenmode { m, k },
            field: Some(Arc::new(eigenfunction(m, k, a)?)),
            coefficients: Vec::new(),
            analytic_ww0: None,
        })
    }

    /// `w_{M,K} = ∑ v_{m,k} φ_{m,k}` over `(m,k) ≠ (1,1)`.
    pub fn fourier_optimal(
        spec: &ProblemSpec,
        field: &DeformationField,
        rule: &QuadratureRule,
        m_max: usize,
        k_max: usize,
    ) -> Result<Self> {
        let coefficients = fourier_coefficients(spec, field, rule, m_max, k_max)?;
        let a = rule.a();
        let mut terms = Vec::with_capacity(coefficients.len());
        for c in &coefficients {
            let phi: FieldRef = Arc::new(eigenfunction(c.m, c.k, a)?);
            terms.push((c.value, phi));
        }
        Ok(Self {
            kind: CorrectorKind::FourierOptimal { m_max, k_max },
            field: Some(Arc::new(Combination::new(terms))),
            coefficients,
            analytic_ww0: None,
        })
    }

    /// The exact optimal corrector of cases (iv) and (v), represented by its `⟨w,w⟩₀`.
    pub fn analytic_optimal(case: RectangleCase, a: f64) -> Result<Self> {
        let ww0 = ww0_analytic(case, a)?;
        Ok(Self {
            kind: CorrectorKind::AnalyticOptimal { case, a },
            field: None,
            coefficients: Vec::new(),
            analytic_ww0: Some(ww0),
        })
    }

    pub fn user(label: impl Into<String>, field: FieldRef) -> Self {
        Self {
            kind: CorrectorKind::User { label: label.into() },
            field: Some(field),
            coefficients: Vec::new(),
            analytic_ww0: None,
        }
    }

    /// Same kind, field multiplied by `gamma`.
    pub fn rescaled(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        out.field = self.field.as_ref().map(|f| crate::field::scaled(f.clone(), gamma));
        out.coefficients.iter_mut().for_each(|c| c.value *= gamma);
        out
    }

    pub fn field(&self) -> Option<&FieldRef> {
        self.field.as_ref()
    }

    pub fn coefficients(&self) -> &[FourierCoefficient] {
        &self.coefficients
    }

    pub fn analytic_ww0(&self) -> Option<f64> {
        self.analytic_ww0
    }

    pub fn analytic_case(&self) -> Option<RectangleCase> {
        match self.kind {
            CorrectorKind::AnalyticOptimal { case, .. } => Some(case),
            _ => None,
        }
    }

    pub fn height(&self) -> Option<f64> {
        match self.kind {
            CorrectorKind::AnalyticOptimal { a, .. } => Some(a),
            _ => None,
        }
    }

    /// Short identifier: `y_times_u`, `phi_1_2`, `w_4_6`, `optimal_analytic`, or the user label.
    pub fn id(&self) -> String {
        match &self.kind {
            CorrectorKind::YTimesU => "y_times_u".into(),
            CorrectorKind::Eigenmode { m, k } => format!("phi_{m}_{k}"),
            CorrectorKind::FourierOptimal { m_max, k_max } => format!("w_{m_max}_{k_max}"),
            CorrectorKind::AnalyticOptimal { .. } => "optimal_analytic".into(),
            CorrectorKind::User { label } => label.clone(),
        }
    }

    /// Checks that the field vanishes on `∂Ω` at 64 points per side.
    pub fn check_boundary(&self, a: f64) -> Result<()> {
        let Some(field) = &self.field else {
            return Ok(());
        };
        const N: usize = 64;
        for i in 0..=N {
            let s = i as f64 / N as f64;
            let y = -a + 2.0 * a * s;
            for p in [Vec2::new(0.0, y), Vec2::new(1.0, y), Vec2::new(s, a), Vec2::new(s, -a)] {
                let v = field.value(p);
                if !(v.abs() <= 1e-12) {
                    return Err(Error::Invariant(format!(
                        "corrector {} is {v:e} at boundary point ({}, {})",
                        self.id(),
                        p.x,
                        p.y
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Right-hand side `2u_xx f′θ + 2u_xy fθ′ + u_x(f″θ + fθ″)` of the optimal-corrector problem.
#[derive(Clone)]
pub struct RhsField {
    u: FieldRef,
    shear: SeparableShear,
}

impl RhsField {
    fn eval(&self, p: Vec2) -> f64 {
        let [f, fp, fpp] = self.shear.f.eval(p.x);
        let [th, thp, thpp] = self.shear.theta.eval(p.y);
        let g = self.u.gradient(p);
        let h = self.u.hessian(p).expect("checked at construction");
        2.0 * h[(0, 0)] * fp * th + 2.0 * h[(0, 1)] * f * thp + g.x * (fpp * th + f * thpp)
    }
}

impl ScalarField for RhsField {
    fn value(&self, p: Vec2) -> f64 {
        self.eval(p)
    }

    /// Central differences; the right-hand side is only ever integrated.
    fn gradient(&self, p: Vec2) -> Vec2 {
        let h = 1e-6;
        let dx = Vec2::new(h, 0.0);
        let dy = Vec2::new(0.0, h);
        Vec2::new(
            (self.eval(p + dx) - self.eval(p - dx)) / (2.0 * h),
            (self.eval(p + dy) - self.eval(p - dy)) / (2.0 * h),
        )
    }

    fn label(&self) -> String {
        "rhs".into()
    }
}

/// The right-hand side field for the `p = 2` eigenvalue problem and a separable shear.
pub fn rhs_field(spec: &ProblemSpec, field: &DeformationField) -> Result<RhsField> {
    if spec.kind != ProblemKind::Eigenvalue || spec.p != 2.0 {
        return Err(Error::Unsupported(
            "the optimal-corrector right-hand side needs the p = 2 eigenvalue problem".into(),
        ));
    }
    let shear = *field
        .separable()
        .ok_or_else(|| Error::Unsupported("optimal correctors need R = (f(x)θ(y), 0)".into()))?;
    if spec.u.hessian(Vec2::new(0.5, 0.0)).is_none() {
        return Err(Error::Unsupported("the ground state has no analytic Hessian".into()));
    }
    Ok(RhsField {
        u: spec.u.clone(),
        shear,
    })
}

/// `v_{m,k} = ∫ rhs·φ_{m,k} / (λ_{m,k} − λ_{1,1})` for `(m,k) ∈ [1,M]×[1,K] ∖ {(1,1)}`, row-major in `m`.
pub fn fourier_coefficients(
    spec: &ProblemSpec,
    field: &DeformationField,
    rule: &QuadratureRule,
    m_max: usize,
    k_max: usize,
) -> Result<Vec<FourierCoefficient>> {
    if m_max == 0 || k_max == 0 {
        return Err(Error::Index(format!("truncation must be at least 1, got ({m_max}, {k_max})")));
    }
    let rhs = rhs_field(spec, field)?;
    let a = rule.a();
    let g: Vec<f64> = rule.nodes().iter().map(|&p| rhs.value(p)).collect();
    let l11 = lambda(1, 1, a)?;
    let mut out = Vec::with_capacity(m_max * k_max);
    let mut buf = vec![0.0; g.len()];
    for m in 1..=m_max {
        for k in 1..=k_max {
            if (m, k) == (1, 1) {
                continue;
            }
            let phi = eigenfunction(m, k, a)?;
            for (slot, (&p, &gi)) in buf.iter_mut().zip(rule.nodes().iter().zip(&g)) {
                *slot = gi * phi.value(p);
            }
            let lam = lambda(m, k, a)?;
            let gap = lam - l11;
            out.push(FourierCoefficient {
                m,
                k,
                lambda: lam,
                gap,
                value: rule.integrate_values(&buf)? / gap,
            });
        }
    }
    Ok(out)
}

/// `∑ (λ_{m,k} − λ_{1,1}) v_{m,k}²`.
pub fn ww0_truncated(coefficients: &[FourierCoefficient]) -> f64 {
    let terms: Vec<f64> = coefficients.iter().map(|c| c.gap * c.value * c.value).collect();
    crate::quadrature::pairwise_sum(&terms)
}

/// Closed-form `⟨w,w⟩₀` of the optimal corrector for cases (iv) and (v).
pub fn ww0_analytic(case: RectangleCase, a: f64) -> Result<f64> {
    if !(4.0 * a * a >= 3.0) || !a.is_finite() {
        return Err(Error::Domain(format!("closed form needs 4a² >= 3, got a = {a}")));
    }
    let s = (4.0 * a * a - 3.0).sqrt();
    let arg = PI * s / (2.0 * a);
    let (sn, cs) = arg.sin_cos();
    if sn.abs() <= 1e-9 {
        return Err(Error::Singular(format!("cot argument {arg} is at a pole")));
    }
    let cot = cs / sn;
    match case {
        RectangleCase::Iv => Ok(PI.powi(3) / (64.0 * a) * (3.0 * PI + PI * a * a - 8.0 * a * s * cot)),
        RectangleCase::V => {
            Ok(PI * PI / (64.0 * a) * (3.0 + 8.0 * a * a + 2.0 * PI * PI - 8.0 * PI * a * s * cot))
        }
        other => Err(Error::Unsupported(format!("no closed form for case {}", other.id()))),
    }
}

/// CSV table `m,k,v_mk`.
pub fn coefficients_csv(coefficients: &[FourierCoefficient]) -> String {
    let mut out = String::from("m,k,v_mk\n");
    for c in coefficients {
        let _ = writeln!(out, "{},{},{}", c.m, c.k, format_sci(c.value));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{inner0, q_functional};
    use approx::assert_relative_eq;

    #[test]
    fn case_catalog() {
        assert_eq!(RectangleCase::parse("IV"), Some(RectangleCase::Iv));
        assert_eq!(RectangleCase::parse("vii"), None);
        for c in RectangleCase::all() {
            assert!(c.theta(1.1).is_odd());
            assert_eq!(RectangleCase::parse(c.id()), Some(c));
        }
    }

    #[test]
    fn rhs_examples() {
        let a = 1.0;
        let spec = ProblemSpec::rectangle_eigenvalue(a).unwrap();
        let zero = DeformationField::shear(Profile::Zero, Profile::Linear);
        let rhs = rhs_field(&spec, &zero).unwrap();
        assert_eq!(rhs.value(Vec2::new(0.3, 0.2)), 0.0);

        let rhs = rhs_field(&spec, &RectangleCase::Ii.deformation(a)).unwrap();
        let p = Vec2::new(0.37, -0.44);
        let h = spec.u.hessian(p).unwrap();
        assert_relative_eq!(rhs.value(p), 2.0 * h[(0, 0)] * p.y + 2.0 * h[(0, 1)] * p.x, epsilon = 1e-14);

        let general = DeformationField::new(crate::kinematics::FnVectorField::new(|p| p));
        assert!(matches!(rhs_field(&spec, &general), Err(Error::Unsupported(_))));
    }

    #[test]
    fn rhs_represents_q() {
        // Q[h] = ∫ rhs·h for h vanishing on the boundary
        let a = 1.06;
        let rule = QuadratureRule::rectangle(a).unwrap();
        let spec = ProblemSpec::rectangle_eigenvalue(a).unwrap();
        for case in RectangleCase::all() {
            let field = case.deformation(a);
            let rhs = rhs_field(&spec, &field).unwrap();
            for (m, k) in [(1, 1), (1, 2), (2, 2), (3, 4)] {
                let h = eigenfunction(m, k, a).unwrap();
                let q = q_functional(&spec, &field, &rule, &h).unwrap();
                let proj = rule.integrate(|p| rhs.value(p) * h.value(p)).unwrap();
                assert!((q - proj).abs() <= 1e-10, "{case:?} ({m},{k}) {q} {proj}");
            }
        }
    }

    #[test]
    fn coefficients_parity_and_zero_field() {
        let a = 1.05;
        let rule = QuadratureRule::rectangle(a).unwrap();
        let spec = ProblemSpec::rectangle_eigenvalue(a).unwrap();
        let coeffs = fourier_coefficients(&spec, &RectangleCase::Iv.deformation(a), &rule, 6, 6).unwrap();
        assert_eq!(coeffs.len(), 35);
        assert!(!coeffs.iter().any(|c| (c.m, c.k) == (1, 1)));
        for c in &coeffs {
            if c.k % 2 == 1 {
                assert!(c.value.abs() <= 1e-12, "({},{}) {}", c.m, c.k, c.value);
            }
        }
        let zero = DeformationField::shear(Profile::Zero, Profile::Linear);
        let coeffs = fourier_coefficients(&spec, &zero, &rule, 3, 3).unwrap();
        assert!(coeffs.iter().all(|c| c.value == 0.0));
        assert_eq!(ww0_truncated(&[]), 0.0);
    }

    #[test]
    fn galerkin_identity_on_truncated_space() {
        let a = 1.04;
        let rule = QuadratureRule::rectangle(a).unwrap();
        let spec = ProblemSpec::rectangle_eigenvalue(a).unwrap();
        let field = RectangleCase::I.deformation(a);
        let w = CorrectorSpec::fourier_optimal(&spec, &field, &rule, 4, 6).unwrap();
        let wf = w.field().unwrap();
        let ww = inner0(&spec, &rule, wf.as_ref(), wf.as_ref()).unwrap();
        let qw = q_functional(&spec, &field, &rule, wf.as_ref()).unwrap();
        assert_relative_eq!(ww, ww0_truncated(w.coefficients()), max_relative = 1e-10);
        assert_relative_eq!(qw * qw / ww, ww, max_relative = 1e-9);
        // ⟨w,h⟩₀ = Q[h] for h in the truncated space
        for (m, k) in [(1, 2), (3, 4), (2, 6)] {
            let h = eigenfunction(m, k, a).unwrap();
            let lhs = inner0(&spec, &rule, wf.as_ref(), &h).unwrap();
            let rhs = q_functional(&spec, &field, &rule, &h).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10, "{lhs} {rhs}");
        }
        w.check_boundary(a).unwrap();
    }

    #[test]
    fn ww0_analytic_examples() {
        let first = PI.powi(4) / 16.0;
        assert_relative_eq!(ww0_analytic(RectangleCase::Iv, 1.0).unwrap(), first, epsilon = 1e-13);
        assert_relative_eq!(
            ww0_analytic(RectangleCase::V, 1.0).unwrap(),
            PI * PI * (11.0 + 2.0 * PI * PI) / 64.0,
            epsilon = 1e-13
        );
        assert!(matches!(ww0_analytic(RectangleCase::I, 1.0), Err(Error::Unsupported(_))));
        assert!(matches!(ww0_analytic(RectangleCase::Iv, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn truncation_is_monotone() {
        let a = 1.02;
        let rule = QuadratureRule::rectangle(a).unwrap();
        let spec = ProblemSpec::rectangle_eigenvalue(a).unwrap();
        let field = RectangleCase::V.deformation(a);
        let mut prev = 0.0;
        for n in 1..6 {
            let ww = ww0_truncated(&fourier_coefficients(&spec, &field, &rule, n, n).unwrap());
            assert!(ww >= prev - 1e-14);
            prev = ww;
        }
    }

    #[test]
    fn boundary_checks() {
        let a = 1.1;
        let spec = ProblemSpec::rectangle_eigenvalue(a).unwrap();
        CorrectorSpec::y_times_u(&spec).check_boundary(a).unwrap();
        CorrectorSpec::eigenmode(1, 2, a).unwrap().check_boundary(a).unwrap();
        let bad = CorrectorSpec::user(
            "one",
            Arc::new(crate::field::FnField::new("one", |_| 1.0, |_| Vec2::zeros())),
        );
        assert!(matches!(bad.check_boundary(a), Err(Error::Invariant(_))));
    }

    #[test]
    fn csv_export() {
        let coeffs = [FourierCoefficient {
            m: 1,
            k: 2,
            lambda: 1.0,
            gap: 1.0,
            value: -0.125,
        }];
        assert_eq!(coefficients_csv(&coeffs), "m,k,v_mk\n1,2,-1.250000000000e-01\n");
    }
}
