//! Scalar fields on the reference rectangle: value, gradient and optional Hessian.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::quadrature::QuadratureRule;
use crate::{Mat2, Vec2};

/// A smooth function on the reference rectangle.
pub trait ScalarField: Send + Sync {
    fn value(&self, p: Vec2) -> f64;

    fn gradient(&self, p: Vec2) -> Vec2;

    /// Analytic Hessian, when available.
    fn hessian(&self, _p: Vec2) -> Option<Mat2> {
        None
    }

    fn label(&self) -> String {
        "field".to_string()
    }
}

pub type FieldRef = Arc<dyn ScalarField>;

/// The zero function.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroField;

impl ScalarField for ZeroField {
    fn value(&self, _p: Vec2) -> f64 {
        0.0
    }

    fn gradient(&self, _p: Vec2) -> Vec2 {
        Vec2::zeros()
    }

    fn hessian(&self, _p: Vec2) -> Option<Mat2> {
        Some(Mat2::zeros())
    }

    fn label(&self) -> String {
        "0".to_string()
    }
}

/// `c·g`.
#[derive(Clone)]
pub struct Scaled {
    pub factor: f64,
    pub inner: FieldRef,
}

impl ScalarField for Scaled {
    fn value(&self, p: Vec2) -> f64 {
        self.factor * self.inner.value(p)
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        self.factor * self.inner.gradient(p)
    }

    fn hessian(&self, p: Vec2) -> Option<Mat2> {
        self.inner.hessian(p).map(|h| self.factor * h)
    }

    fn label(&self) -> String {
        format!("{}*{}", self.factor, self.inner.label())
    }
}

pub fn scaled(inner: FieldRef, factor: f64) -> FieldRef {
    Arc::new(Scaled { factor, inner })
}

/// `∑ cᵢ gᵢ`.
#[derive(Clone, Default)]
pub struct Combination {
    pub terms: Vec<(f64, FieldRef)>,
}

impl Combination {
    pub fn new(terms: Vec<(f64, FieldRef)>) -> Self {
        Self { terms }
    }
}

impl ScalarField for Combination {
    fn value(&self, p: Vec2) -> f64 {
        self.terms.iter().map(|(c, g)| c * g.value(p)).sum()
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        self.terms
            .iter()
            .fold(Vec2::zeros(), |acc, (c, g)| acc + *c * g.gradient(p))
    }

    fn hessian(&self, p: Vec2) -> Option<Mat2> {
        let mut acc = Mat2::zeros();
        for (c, g) in &self.terms {
            acc += *c * g.hessian(p)?;
        }
        Some(acc)
    }

    fn label(&self) -> String {
        format!("combination[{}]", self.terms.len())
    }
}

/// `y·g(x, y)`.
#[derive(Clone)]
pub struct TimesY(pub FieldRef);

impl ScalarField for TimesY {
    fn value(&self, p: Vec2) -> f64 {
        p.y * self.0.value(p)
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        p.y * self.0.gradient(p) + Vec2::new(0.0, self.0.value(p))
    }

    fn hessian(&self, p: Vec2) -> Option<Mat2> {
        let h = self.0.hessian(p)?;
        let g = self.0.gradient(p);
        // ∂²(y g) = y ∂²g + e_y ⊗ ∇g + ∇g ⊗ e_y
        Some(p.y * h + Mat2::new(0.0, g.x, g.x, 2.0 * g.y))
    }

    fn label(&self) -> String {
        format!("y*{}", self.0.label())
    }
}

type ValueFn = dyn Fn(Vec2) -> f64 + Send + Sync;
type GradFn = dyn Fn(Vec2) -> Vec2 + Send + Sync;

/// A field given by closures.
pub struct FnField {
    value: Box<ValueFn>,
    gradient: Box<GradFn>,
    label: String,
}

impl FnField {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Box::new(gradient),
            label: label.into(),
        }
    }
}

impl ScalarField for FnField {
    fn value(&self, p: Vec2) -> f64 {
        (self.value)(p)
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        (self.gradient)(p)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// `∑ c_{kl} sin(kπx) sin(lπ(y+a)/2a)`, a Dirichlet sine series on `(0,1)×(−a,a)`.
#[derive(Clone, Debug)]
pub struct SineSeries {
    a: f64,
    /// Row-major `kx × ly` coefficients, `coeffs[(k−1)·ly + (l−1)]`.
    coeffs: Vec<f64>,
    kx: usize,
    ly: usize,
}

impl SineSeries {
    pub fn new(a: f64, kx: usize, ly: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), kx * ly, "coefficient table must be kx*ly");
        Self { a, coeffs, kx, ly }
    }

    pub fn modes(&self) -> (usize, usize) {
        (self.kx, self.ly)
    }

    pub fn coefficient(&self, k: usize, l: usize) -> f64 {
        self.coeffs[(k - 1) * self.ly + (l - 1)]
    }

    fn axis(&self, p: Vec2) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let wy = PI / (2.0 * self.a);
        let sx: Vec<(f64, f64)> = (1..=self.kx).map(|k| (k as f64 * PI * p.x).sin_cos()).collect();
        let sy: Vec<(f64, f64)> = (1..=self.ly)
            .map(|l| (l as f64 * wy * (p.y + self.a)).sin_cos())
            .collect();
        let xs = sx.iter().map(|v| v.0).collect();
        let dxs = sx
            .iter()
            .enumerate()
            .map(|(i, v)| (i + 1) as f64 * PI * v.1)
            .collect();
        let ys = sy.iter().map(|v| v.0).collect();
        let dys = sy
            .iter()
            .enumerate()
            .map(|(i, v)| (i + 1) as f64 * wy * v.1)
            .collect();
        (xs, dxs, ys, dys)
    }

    fn bilinear(&self, left: &[f64], right: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, lv) in left.iter().enumerate() {
            let row = &self.coeffs[k * self.ly..(k + 1) * self.ly];
            let inner: f64 = row.iter().zip(right).map(|(c, r)| c * r).sum();
            acc += lv * inner;
        }
        acc
    }
}

impl ScalarField for SineSeries {
    fn value(&self, p: Vec2) -> f64 {
        let (xs, _, ys, _) = self.axis(p);
        self.bilinear(&xs, &ys)
    }

    fn gradient(&self, p: Vec2) -> Vec2 {
        let (xs, dxs, ys, dys) = self.axis(p);
        Vec2::new(self.bilinear(&dxs, &ys), self.bilinear(&xs, &dys))
    }

    fn label(&self) -> String {
        format!("sine_series[{}x{}]", self.kx, self.ly)
    }
}

/// Values and gradients of a field at the nodes of a rule, in node order.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub values: Vec<f64>,
    pub grads: Vec<Vec2>,
}

impl Samples {
    pub fn new(field: &dyn ScalarField, rule: &QuadratureRule) -> Self {
        let nodes = rule.nodes();
        Self {
            values: nodes.iter().map(|&p| field.value(p)).collect(),
            grads: nodes.iter().map(|&p| field.gradient(p)).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            grads: vec![Vec2::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &Samples, beta: f64) -> Samples {
        Samples {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| alpha * x + beta * y)
                .collect(),
            grads: self
                .grads
                .iter()
                .zip(&other.grads)
                .map(|(x, y)| alpha * x + beta * y)
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Samples {
        self.combine(c, &Samples::zeros(self.len()), 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bump() -> FieldRef {
        Arc::new(FnField::new(
            "bump",
            |p| p.x * (1.0 - p.x) * (1.0 - p.y * p.y),
            |p| {
                Vec2::new(
                    (1.0 - 2.0 * p.x) * (1.0 - p.y * p.y),
                    -2.0 * p.y * p.x * (1.0 - p.x),
                )
            },
        ))
    }

    #[test]
    fn combinators_are_linear() {
        let g = bump();
        let c: FieldRef = Arc::new(Combination::new(vec![(2.0, g.clone()), (-0.5, scaled(g.clone(), 4.0))]));
        let p = Vec2::new(0.3, 0.4);
        assert_eq!(c.value(p), 0.0);
        assert!(c.gradient(p).norm() == 0.0);
    }

    #[test]
    fn times_y_gradient() {
        let g = bump();
        let f = TimesY(g.clone());
        let p = Vec2::new(0.2, -0.6);
        let h = 1e-6;
        let fx = (f.value(p + Vec2::new(h, 0.0)) - f.value(p - Vec2::new(h, 0.0))) / (2.0 * h);
        let fy = (f.value(p + Vec2::new(0.0, h)) - f.value(p - Vec2::new(0.0, h))) / (2.0 * h);
        assert_relative_eq!(f.gradient(p).x, fx, epsilon = 1e-9);
        assert_relative_eq!(f.gradient(p).y, fy, epsilon = 1e-9);
    }

    #[test]
    fn sine_series_gradient_and_boundary() {
        let a = 1.3;
        let s = SineSeries::new(a, 2, 3, vec![1.0, 0.2, -0.1, 0.05, 0.3, 0.7]);
        for &p in &[Vec2::new(0.0, 0.4), Vec2::new(1.0, -0.2), Vec2::new(0.5, a), Vec2::new(0.3, -a)] {
            assert!(s.value(p).abs() < 1e-14);
        }
        let p = Vec2::new(0.37, 0.21);
        let h = 1e-6;
        let fx = (s.value(p + Vec2::new(h, 0.0)) - s.value(p - Vec2::new(h, 0.0))) / (2.0 * h);
        let fy = (s.value(p + Vec2::new(0.0, h)) - s.value(p - Vec2::new(0.0, h))) / (2.0 * h);
        assert_relative_eq!(s.gradient(p).x, fx, epsilon = 1e-8);
        assert_relative_eq!(s.gradient(p).y, fy, epsilon = 1e-8);
        assert_eq!(s.coefficient(2, 3), 0.7);
    }

    #[test]
    fn samples_combine() {
        let rule = QuadratureRule::new(1.0, 1, 1, 3).unwrap();
        let s = Samples::new(bump().as_ref(), &rule);
        let twice = s.combine(1.0, &s, 1.0);
        assert_eq!(twice, s.scale(2.0));
        assert_eq!(s.len(), 9);
    }
}
