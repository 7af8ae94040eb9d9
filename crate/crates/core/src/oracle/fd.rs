//! Finite differences in `t` of the trajectory value, evaluated by pullback quadrature.

use serde::{Deserialize, Serialize};

use crate::corrector::CorrectorSpec;
use crate::error::{Error, Result};
use crate::field::Samples;
use crate::forms::{nehari_alpha_samples, pullback_moments, Assembly, ProblemKind, ProblemSpec};
use crate::kinematics::DeformationField;
use crate::quadrature::QuadratureRule;

pub const MIN_STEP: f64 = 1e-5;
pub const MAX_STEP: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdDerivatives {
    pub d1: f64,
    pub d2: f64,
    pub step: f64,
    /// Scaling applied to the (projected) corrector.
    pub gamma: f64,
}

/// A trajectory `t ↦ u + tγṽ` ready for evaluation.
pub struct Trajectory<'a> {
    spec: &'a ProblemSpec,
    field: &'a DeformationField,
    rule: &'a QuadratureRule,
    u: Samples,
    v: Samples,
    pub gamma: f64,
}

impl<'a> Trajectory<'a> {
    /// Uses the corrector scaled by `γ* = −Q[ṽ]/⟨ṽ,ṽ⟩₀`, where `ṽ` is the
    /// corrector with its `⟨u,·⟩₀`-component removed (Lane–Emden only).
    pub fn optimal(
        spec: &'a ProblemSpec,
        field: &'a DeformationField,
        rule: &'a QuadratureRule,
        corrector: &CorrectorSpec,
    ) -> Result<Self> {
        let asm = Assembly::new(spec, field, rule);
        let v = match corrector.field() {
            Some(f) => asm.sample(f.as_ref()),
            None => {
                return Err(Error::Unsupported(format!(
                    "corrector {} has no field to follow",
                    corrector.id()
                )))
            }
        };
        let v = if spec.kind == ProblemKind::LaneEmden {
            let uu = asm.inner0(&asm.u, &asm.u)?;
            let c = asm.inner0(&asm.u, &v)? / uu;
            v.combine(1.0, &asm.u, -c)
        } else {
            v
        };
        let vv = asm.inner0(&v, &v)?;
        let qv = asm.q(&v)?;
        let gamma = if vv > 0.0 { -qv / vv } else { 0.0 };
        Ok(Self {
            spec,
            field,
            rule,
            v: v.scale(gamma),
            u: asm.u,
            gamma,
        })
    }

    /// Follows the corrector as given (`γ = 1`, no projection).
    pub fn plain(
        spec: &'a ProblemSpec,
        field: &'a DeformationField,
        rule: &'a QuadratureRule,
        corrector: Option<&CorrectorSpec>,
    ) -> Self {
        let u = Samples::new(spec.u.as_ref(), rule);
        let v = match corrector.and_then(|c| c.field()) {
            Some(f) => Samples::new(f.as_ref(), rule),
            None => Samples::zeros(rule.len()),
        };
        Self {
            spec,
            field,
            rule,
            u,
            v,
            gamma: 1.0,
        }
    }

    /// `ν(t)` (Rayleigh quotient) or `m(t) = (1/p − 1/q) α_t^p A(t)`.
    pub fn value(&self, t: f64) -> Result<f64> {
        let m = pullback_moments(self.spec, self.field, self.rule, &self.u, &self.v, t)?;
        match self.spec.kind {
            ProblemKind::Eigenvalue => {
                if !(m.mass_p > 0.0) {
                    return Err(Error::DegenerateTrajectory(format!("zero mass at t = {t}")));
                }
                Ok(m.gradient / m.mass_p)
            }
            ProblemKind::LaneEmden => {
                let q = self.spec.q.expect("lane-emden");
                let p = self.spec.p;
                let alpha = nehari_alpha_samples(self.spec, self.field, self.rule, &self.u, &self.v, t)?;
                Ok((1.0 / p - 1.0 / q) * alpha.powf(p) * m.gradient)
            }
        }
    }

    /// Central first and second differences at `step` and `step/2`, combined by one Richardson step.
    pub fn derivatives(&self, step: f64) -> Result<FdDerivatives> {
        if !(MIN_STEP..=MAX_STEP).contains(&step) {
            return Err(Error::Domain(format!(
                "finite-difference step {step:e} outside [{MIN_STEP:e}, {MAX_STEP:e}]"
            )));
        }
        let f0 = self.value(0.0)?;
        let diffs = |h: f64| -> Result<(f64, f64)> {
            let fp = self.value(h)?;
            let fm = self.value(-h)?;
            Ok(((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)))
        };
        let (d1h, d2h) = diffs(step)?;
        let (d1q, d2q) = diffs(step / 2.0)?;
        Ok(FdDerivatives {
            d1: (4.0 * d1q - d1h) / 3.0,
            d2: (4.0 * d2q - d2h) / 3.0,
            step,
            gamma: self.gamma,
        })
    }
}

/// `(d1, d2)` of the trajectory value along the `γ*`-scaled corrector.
pub fn fd_trajectory_derivatives(
    spec: &ProblemSpec,
    field: &DeformationField,
    rule: &QuadratureRule,
    corrector: &CorrectorSpec,
    step: f64,
) -> Result<FdDerivatives> {
    Trajectory::optimal(spec, field, rule, corrector)?.derivatives(step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::RectangleCase;
    use crate::shapederiv::second_order;

    #[test]
    fn zero_field_gives_zero() {
        let a = 1.0;
        let rule = QuadratureRule::rectangle(a).unwrap();
        let spec = ProblemSpec::rectangle_eigenvalue(a).unwrap();
        let corr = CorrectorSpec::eigenmode(1, 2, a).unwrap();
        let d = fd_trajectory_derivatives(&spec, &DeformationField::zero(), &rule, &corr, 1e-3).unwrap();
        assert!(d.d1.abs() <= 1e-10 && d.d2.abs() <= 1e-10, "{d:?}");
    }

    #[test]
    fn step_range_enforced() {
        let a = 1.0;
        let rule = QuadratureRule::rectangle(a).unwrap();
        let spec = ProblemSpec::rectangle_eigenvalue(a).unwrap();
        let corr = CorrectorSpec::eigenmode(1, 2, a).unwrap();
        let field = RectangleCase::I.deformation(a);
        for step in [1e-6, 0.05] {
            let err = fd_trajectory_derivatives(&spec, &field, &rule, &corr, step).unwrap_err();
            assert!(matches!(err, Error::Domain(_)));
        }
    }

    #[test]
    fn case_i_yu_matches_formula() {
        let a = 1.05;
        let rule = QuadratureRule::rectangle(a).unwrap();
        let spec = ProblemSpec::rectangle_eigenvalue(a).unwrap();
        let field = RectangleCase::I.deformation(a);
        let corr = CorrectorSpec::y_times_u(&spec);
        let rep = second_order(&spec, &field, &rule, &corr).unwrap();
        let d = fd_trajectory_derivatives(&spec, &field, &rule, &corr, 1e-3).unwrap();
        assert!(d.d1.abs() <= 1e-8, "{d:?}");
        assert!((d.d2 - rep.second_order).abs() <= 1e-5, "{} vs {}", d.d2, rep.second_order);
    }
}
