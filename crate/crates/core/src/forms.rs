//! The second variation `⟨g,h⟩₀`, the coupling functional `Q[h]` and the
//! Nehari rescaling for the eigenvalue and Lane–Emden problems.
//!
//! Both problems are handled through one Lagrangian
//! `L(s, z) = (1/p)|z|^p − (c/r)|s|^r`: the eigenvalue problem uses
//! `c = λ`, `r = p`; Lane–Emden uses `c = 1`, `r = q`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldRef, Samples, ScalarField};
use crate::kinematics::{chi2_2d, DeformationField};
use crate::quadrature::QuadratureRule;
use crate::spectral;
use crate::{Mat2, Vec2};

/// Below this gradient norm the `|Du|^{p−2}` and `|Du|^{p−4}` factors are set to 0 (p > 2).
pub const DEGENERATE_GRADIENT: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Eigenvalue,
    LaneEmden,
}

/// A problem together with its ground state `u` and level.
#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub p: f64,
    /// Lane–Emden exponent; `None` for the eigenvalue problem.
    pub q: Option<f64>,
    pub u: FieldRef,
    /// `λ₁(Ω)` for the eigenvalue problem, `E₀[u]` for Lane–Emden.
    pub level: f64,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("kind", &self.kind)
            .field("p", &self.p)
            .field("q", &self.q)
            .field("u", &self.u.label())
            .field("level", &self.level)
            .finish()
    }
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be a finite exponent >= 2, got {v}")))
    }
}

impl ProblemSpec {
    pub fn eigenvalue(u: FieldRef, p: f64, lambda: f64) -> Result<Self> {
        check_exponent("p", p)?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain(format!("eigenvalue must be positive, got {lambda}")));
        }
        Ok(Self {
            kind: ProblemKind::Eigenvalue,
            p,
            q: None,
            u,
            level: lambda,
        })
    }

    /// Lane–Emden problem; the level `E₀[u]` is computed with `rule`.
    pub fn lane_emden(u: FieldRef, p: f64, q: f64, rule: &QuadratureRule) -> Result<Self> {
        check_exponent("p", p)?;
        check_exponent("q", q)?;
        if q == p {
            return Err(Error::Domain("Lane-Emden needs q != p".into()));
        }
        // in two dimensions the critical exponent is infinite for p >= 2
        let mut spec = Self {
            kind: ProblemKind::LaneEmden,
            p,
            q: Some(q),
            u,
            level: 0.0,
        };
        let s = Samples::new(spec.u.as_ref(), rule);
        let a = rule.integrate_values(&s.grads.iter().map(|g| norm_pow(*g, p)).collect::<Vec<_>>())?;
        let b = rule.integrate_values(&s.values.iter().map(|v| v.abs().powf(q)).collect::<Vec<_>>())?;
        spec.level = a / p - b / q;
        Ok(spec)
    }

    /// `p = 2` eigenvalue problem on the rectangle with `u = sin(πx)cos(πy/2a)`.
    pub fn rectangle_eigenvalue(a: f64) -> Result<Self> {
        let u = spectral::ground_state(a)?;
        Self::eigenvalue(Arc::new(u), 2.0, spectral::lambda1(a)?)
    }

    /// Same problem with another representative of the ground state.
    pub fn with_ground_state(&self, u: FieldRef) -> Self {
        Self { u, ..self.clone() }
    }

    /// `(c, r)` of the unified Lagrangian.
    pub fn coupling(&self) -> (f64, f64) {
        match self.kind {
            ProblemKind::Eigenvalue => (self.level, self.p),
            ProblemKind::LaneEmden => (1.0, self.q.expect("lane-emden carries q")),
        }
    }

    /// Checks the ground-state identity: `∫|Du|^p = λ∫|u|^p` (eigenvalue,
    /// relative `tol`) or the Nehari identity `∫|Du|^p = ∫|u|^q` (Lane–Emden).
    pub fn validate(&self, rule: &QuadratureRule, tol: f64) -> Result<()> {
        let s = Samples::new(self.u.as_ref(), rule);
        let (c, r) = self.coupling();
        let grad = rule.integrate_values(&s.grads.iter().map(|g| norm_pow(*g, self.p)).collect::<Vec<_>>())?;
        let mass = rule.integrate_values(&s.values.iter().map(|v| v.abs().powf(r)).collect::<Vec<_>>())?;
        let rhs = match self.kind {
            ProblemKind::Eigenvalue => c * mass,
            ProblemKind::LaneEmden => mass,
        };
        let defect = (grad - rhs).abs() / grad.abs().max(f64::MIN_POSITIVE);
        if !(defect <= tol) {
            return Err(Error::Invariant(format!(
                "ground-state identity defect {defect:e} exceeds {tol:e} ({:?})",
                self.kind
            )));
        }
        Ok(())
    }
}

/// `|z|^p`, exact for `p = 2`.
pub(crate) fn norm_pow(z: Vec2, p: f64) -> f64 {
    if p == 2.0 {
        z.norm_squared()
    } else {
        z.norm().powf(p)
    }
}

/// Lagrangian data at one node.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Pointwise {
    pub z: Vec2,
    pub l: f64,
    pub dzl: Vec2,
    pub kp2: f64,
    pub kp4: f64,
    pub lu: f64,
    pub luu: f64,
}

impl Pointwise {
    /// `D²_zL(a, b)`.
    #[inline]
    pub fn d2l(&self, a: Vec2, b: Vec2) -> f64 {
        self.kp2 * a.dot(&b) + self.kp4 * self.z.dot(&a) * self.z.dot(&b)
    }
}

pub(crate) fn pointwise(p: f64, c: f64, r: f64, s: f64, z: Vec2) -> Pointwise {
    let n = z.norm();
    let (kp2, kp4) = if p == 2.0 {
        (1.0, 0.0)
    } else if n < DEGENERATE_GRADIENT {
        (0.0, 0.0)
    } else {
        (n.powf(p - 2.0), (p - 2.0) * n.powf(p - 4.0))
    };
    let sr2 = if r == 2.0 { 1.0 } else { s.abs().powf(r - 2.0) };
    Pointwise {
        z,
        l: norm_pow(z, p) / p - c / r * s.abs().powf(r),
        dzl: kp2 * z,
        kp2,
        kp4,
        lu: -c * sr2 * s,
        luu: -c * (r - 1.0) * sr2,
    }
}

/// `DR`, `DR̃` and derived scalars at every node.
#[derive(Clone, Debug)]
pub(crate) struct NodeKinematics {
    pub dr: Vec<Mat2>,
    pub drt: Vec<Mat2>,
    pub div: Vec<f64>,
}

impl NodeKinematics {
    pub fn new(field: &DeformationField, rule: &QuadratureRule) -> Self {
        let dr: Vec<Mat2> = rule.nodes().iter().map(|&p| field.dr(p)).collect();
        let drt: Vec<Mat2> = rule.nodes().iter().map(|&p| field.drtilde(p)).collect();
        let div = dr.iter().map(|m| m.trace()).collect();
        Self { dr, drt, div }
    }
}

/// Named integrals in a stable order.
pub type Terms = BTreeMap<String, f64>;

/// Value of `⟨g,h⟩₀` with its per-integral breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearFormValue {
    pub value: f64,
    pub breakdown: Terms,
}

/// All per-node data needed by the derivative formulas for one
/// (problem, deformation, rule) triple.
pub(crate) struct Assembly<'a> {
    pub spec: &'a ProblemSpec,
    pub rule: &'a QuadratureRule,
    pub u: Samples,
    pub pw: Vec<Pointwise>,
    pub kin: NodeKinematics,
}

impl<'a> Assembly<'a> {
    pub fn new(spec: &'a ProblemSpec, field: &DeformationField, rule: &'a QuadratureRule) -> Self {
        let u = Samples::new(spec.u.as_ref(), rule);
        Self::with_samples(spec, field, rule, u)
    }

    pub fn with_samples(spec: &'a ProblemSpec, field: &DeformationField, rule: &'a QuadratureRule, u: Samples) -> Self {
        let (c, r) = spec.coupling();
        let pw = u
            .values
            .iter()
            .zip(&u.grads)
            .map(|(&s, &z)| pointwise(spec.p, c, r, s, z))
            .collect();
        Self {
            spec,
            rule,
            u,
            pw,
            kin: NodeKinematics::new(field, rule),
        }
    }

    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> Result<f64> {
        let values: Vec<f64> = (0..self.rule.len()).map(f).collect();
        self.rule.integrate_values(&values)
    }

    pub fn sample(&self, field: &dyn ScalarField) -> Samples {
        Samples::new(field, self.rule)
    }

    pub fn inner0_terms(&self, g: &Samples, h: &Samples) -> Result<BilinearFormValue> {
        let mut breakdown = Terms::new();
        let grad = self.integrate(|i| self.pw[i].kp2 * g.grads[i].dot(&h.grads[i]))?;
        breakdown.insert("gradient".into(), grad);
        let mut value = grad;
        if self.spec.p != 2.0 {
            let z = |i: usize| self.pw[i].z;
            let deg = self.integrate(|i| self.pw[i].kp4 * z(i).dot(&g.grads[i]) * z(i).dot(&h.grads[i]))?;
            breakdown.insert("gradient_p_minus_4".into(), deg);
            value += deg;
        }
        let mass = self.integrate(|i| self.pw[i].luu * g.values[i] * h.values[i])?;
        breakdown.insert("mass".into(), mass);
        value += mass;
        Ok(BilinearFormValue { value, breakdown })
    }

    pub fn inner0(&self, g: &Samples, h: &Samples) -> Result<f64> {
        Ok(self.inner0_terms(g, h)?.value)
    }

    pub fn q_terms(&self, h: &Samples) -> Result<(f64, Terms)> {
        let k = &self.kin;
        let du = &self.u.grads;
        let t1 = -self.integrate(|i| self.pw[i].d2l(h.grads[i], k.dr[i].transpose() * du[i]))?;
        let t2 = -self.integrate(|i| self.pw[i].dzl.dot(&(k.dr[i].transpose() * h.grads[i])))?;
        let t3 = self.integrate(|i| self.pw[i].dzl.dot(&h.grads[i]) * k.div[i])?;
        let t4 = self.integrate(|i| self.pw[i].lu * h.values[i] * k.div[i])?;
        let mut terms = Terms::new();
        terms.insert("q_hessian_coupling".into(), t1);
        terms.insert("q_flux_jacobian".into(), t2);
        terms.insert("q_flux_divergence".into(), t3);
        terms.insert("q_source_divergence".into(), t4);
        Ok((t1 + t2 + t3 + t4, terms))
    }

    pub fn q(&self, h: &Samples) -> Result<f64> {
        Ok(self.q_terms(h)?.0)
    }

    /// `∫L div R − ∫(D_zL, DRᵀDu)`.
    pub fn first_order_raw(&self) -> Result<(f64, Terms)> {
        let k = &self.kin;
        let du = &self.u.grads;
        let t1 = self.integrate(|i| self.pw[i].l * k.div[i])?;
        let t2 = -self.integrate(|i| self.pw[i].dzl.dot(&(k.dr[i].transpose() * du[i])))?;
        let mut terms = Terms::new();
        terms.insert("first_lagrangian_divergence".into(), t1);
        terms.insert("first_flux_jacobian".into(), t2);
        Ok((t1 + t2, terms))
    }

    /// The deformation sum of the second derivative in its generic form.
    pub fn deformation_generic(&self) -> Result<(f64, Terms)> {
        let k = &self.kin;
        let du = &self.u.grads;
        let pw = &self.pw;
        let drdu = |i: usize| k.dr[i].transpose() * du[i];
        let t_l_divt = self.integrate(|i| pw[i].l * k.drt[i].trace())?;
        let t_flux_drt = -self.integrate(|i| pw[i].dzl.dot(&(k.drt[i].transpose() * du[i])))?;
        let t_flux_div = -2.0 * self.integrate(|i| pw[i].dzl.dot(&drdu(i)) * k.div[i])?;
        let t_flux_drdr = 2.0 * self.integrate(|i| pw[i].dzl.dot(&((k.dr[i] * k.dr[i]).transpose() * du[i])))?;
        let t_l_chi2 = 2.0 * self.integrate(|i| pw[i].l * chi2_2d(&k.dr[i]))?;
        let t_hess = self.integrate(|i| pw[i].d2l(drdu(i), drdu(i)))?;
        let mut terms = Terms::new();
        terms.insert("d_lagrangian_div_rtilde".into(), t_l_divt);
        terms.insert("d_flux_rtilde".into(), t_flux_drt);
        terms.insert("d_flux_divergence".into(), t_flux_div);
        terms.insert("d_flux_jacobian_squared".into(), t_flux_drdr);
        terms.insert("d_lagrangian_chi2".into(), t_l_chi2);
        terms.insert("d_hessian".into(), t_hess);
        let total = t_l_divt + t_flux_drt + t_flux_div + t_flux_drdr + t_l_chi2 + t_hess;
        Ok((total, terms))
    }

    /// Deformation sum for `R = (ρ, 0)`, `R̃ = 0`.
    pub fn deformation_one_dimensional(&self) -> Result<f64> {
        let k = &self.kin;
        let du = &self.u.grads;
        self.integrate(|i| {
            let w = k.dr[i].transpose() * du[i];
            self.pw[i].d2l(w, w)
        })
    }

    /// Deformation sum for planar fields with `R̃ = 0`.
    pub fn deformation_planar(&self) -> Result<f64> {
        let k = &self.kin;
        let du = &self.u.grads;
        let pw = &self.pw;
        let det = |i: usize| chi2_2d(&k.dr[i]);
        let t1 = -2.0 * self.integrate(|i| pw[i].dzl.dot(&du[i]) * det(i))?;
        let t2 = 2.0 * self.integrate(|i| pw[i].l * det(i))?;
        let t3 = self.deformation_one_dimensional()?;
        Ok(t1 + t2 + t3)
    }

    /// `∫|u|^e` and `∫|u|^e div R`.
    pub fn power_moments(&self, e: f64) -> Result<(f64, f64)> {
        let pow: Vec<f64> = self.u.values.iter().map(|v| v.abs().powf(e)).collect();
        let plain = self.rule.integrate_values(&pow)?;
        let weighted = self.integrate(|i| pow[i] * self.kin.div[i])?;
        Ok((plain, weighted))
    }
}

/// `⟨g,h⟩₀`.
pub fn inner0(spec: &ProblemSpec, rule: &QuadratureRule, g: &dyn ScalarField, h: &dyn ScalarField) -> Result<f64> {
    Ok(inner0_terms(spec, rule, g, h)?.value)
}

/// `⟨g,h⟩₀` with its breakdown.
pub fn inner0_terms(
    spec: &ProblemSpec,
    rule: &QuadratureRule,
    g: &dyn ScalarField,
    h: &dyn ScalarField,
) -> Result<BilinearFormValue> {
    let asm = Assembly::new(spec, &DeformationField::zero(), rule);
    asm.inner0_terms(&asm.sample(g), &asm.sample(h))
}

/// `Q[h]`.
pub fn q_functional(
    spec: &ProblemSpec,
    field: &DeformationField,
    rule: &QuadratureRule,
    h: &dyn ScalarField,
) -> Result<f64> {
    let asm = Assembly::new(spec, field, rule);
    asm.q(&asm.sample(h))
}

/// Pulled-back integrals along `t ↦ u + t·v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PullbackMoments {
    /// `∫|Ψ_tᵀ D(u+tv)|^p φ_t`
    pub gradient: f64,
    /// `∫|u+tv|^p φ_t`
    pub mass_p: f64,
    /// `∫|u+tv|^q φ_t`, `None` for the eigenvalue problem.
    pub mass_q: Option<f64>,
}

/// Evaluates [`PullbackMoments`] at `t` with `Φ_t` inverted exactly at every node.
pub fn pullback_moments(
    spec: &ProblemSpec,
    field: &DeformationField,
    rule: &QuadratureRule,
    u: &Samples,
    v: &Samples,
    t: f64,
) -> Result<PullbackMoments> {
    let n = rule.len();
    let mut grad = Vec::with_capacity(n);
    let mut mass_p = Vec::with_capacity(n);
    let mut mass_q = Vec::with_capacity(n);
    let q = spec.q;
    for (i, &x) in rule.nodes().iter().enumerate() {
        let jac = field.jacobian_t(x, t);
        let phi = jac.determinant();
        if !(phi > 0.0) {
            return Err(Error::Fold { x: x.x, y: x.y, det: phi });
        }
        let psi = jac
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("DPhi_t singular at ({}, {})", x.x, x.y)))?;
        let s = u.values[i] + t * v.values[i];
        let z = u.grads[i] + t * v.grads[i];
        grad.push(norm_pow(psi.transpose() * z, spec.p) * phi);
        mass_p.push(s.abs().powf(spec.p) * phi);
        if let Some(q) = q {
            mass_q.push(s.abs().powf(q) * phi);
        }
    }
    Ok(PullbackMoments {
        gradient: rule.integrate_values(&grad)?,
        mass_p: rule.integrate_values(&mass_p)?,
        mass_q: if q.is_some() {
            Some(rule.integrate_values(&mass_q)?)
        } else {
            None
        },
    })
}

/// Nehari scaling `α_t = (A(t)/B(t))^{1/(q−p)}` that puts `α_t(u+tv)∘Φ_t⁻¹` on `N(Ω_t)`.
pub fn nehari_alpha(
    spec: &ProblemSpec,
    field: &DeformationField,
    rule: &QuadratureRule,
    v: &dyn ScalarField,
    t: f64,
) -> Result<f64> {
    let u = Samples::new(spec.u.as_ref(), rule);
    let v = Samples::new(v, rule);
    nehari_alpha_samples(spec, field, rule, &u, &v, t)
}

pub(crate) fn nehari_alpha_samples(
    spec: &ProblemSpec,
    field: &DeformationField,
    rule: &QuadratureRule,
    u: &Samples,
    v: &Samples,
    t: f64,
) -> Result<f64> {
    let q = match (spec.kind, spec.q) {
        (ProblemKind::LaneEmden, Some(q)) => q,
        _ => {
            return Err(Error::Unsupported(
                "Nehari scaling is defined for the Lane-Emden problem only".into(),
            ))
        }
    };
    let m = pullback_moments(spec, field, rule, u, v, t)?;
    let b = m.mass_q.expect("lane-emden");
    if !(m.gradient > 0.0) {
        return Err(Error::DegenerateTrajectory(format!(
            "gradient integral vanishes at t = {t}"
        )));
    }
    if !(b > 0.0) {
        return Err(Error::DegenerateTrajectory(format!("mass integral vanishes at t = {t}")));
    }
    Ok((m.gradient / b).powf(1.0 / (q - spec.p)))
}
