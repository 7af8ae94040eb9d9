//! Tensor-product panel Gauss–Legendre quadrature on `(0,1)×(−a,a)`.

use crate::error::{Error, Result};
use crate::Vec2;

pub const DEFAULT_PANELS: usize = 4;
pub const DEFAULT_ORDER: usize = 12;

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration on
/// the three-term recurrence for `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess for the i-th largest root
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Gauss rule on `[lo, hi]` with `panels` equal panels.
pub fn composite_1d(lo: f64, hi: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let width = (hi - lo) / panels as f64;
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let left = lo + k as f64 * width;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(left + 0.5 * width * (x + 1.0));
            ws.push(0.5 * width * w);
        }
    }
    (xs, ws)
}

/// Pairwise (tree) summation; the reduction order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Tensor-product rule over the rectangle `(0,1)×(−a,a)`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    a: f64,
    panels_x: usize,
    panels_y: usize,
    order: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    nodes: Vec<Vec2>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(a: f64, panels_x: usize, panels_y: usize, order: usize) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("half-height must be positive, got {a}")));
        }
        if panels_x == 0 || panels_y == 0 || order == 0 {
            return Err(Error::Domain(format!(
                "panel counts and order must be positive, got {panels_x}x{panels_y}, order {order}"
            )));
        }
        let (xs, wx) = composite_1d(0.0, 1.0, panels_x, order);
        let (ys, wy) = composite_1d(-a, a, panels_y, order);
        let mut nodes = Vec::with_capacity(xs.len() * ys.len());
        let mut weights = Vec::with_capacity(xs.len() * ys.len());
        for (x, w1) in xs.iter().zip(&wx) {
            for (y, w2) in ys.iter().zip(&wy) {
                nodes.push(Vec2::new(*x, *y));
                weights.push(w1 * w2);
            }
        }
        Ok(Self {
            a,
            panels_x,
            panels_y,
            order,
            xs,
            ys,
            nodes,
            weights,
        })
    }

    /// Default rule: 4×4 panels, 12 points per panel per axis.
    pub fn rectangle(a: f64) -> Result<Self> {
        Self::new(a, DEFAULT_PANELS, DEFAULT_PANELS, DEFAULT_ORDER)
    }

    /// Same panels, `order` replaced.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        Self::new(self.a, self.panels_x, self.panels_y, order)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn panels(&self) -> (usize, usize) {
        (self.panels_x, self.panels_y)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Distinct x coordinates of the nodes (tensor axis).
    pub fn x_axis(&self) -> &[f64] {
        &self.xs
    }

    pub fn y_axis(&self) -> &[f64] {
        &self.ys
    }

    /// `∑ w_i f(x_i)`; a non-finite `f(x_i)` is reported with its node.
    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> Result<f64> {
        let values: Vec<f64> = self.nodes.iter().map(|&p| f(p)).collect();
        self.integrate_values(&values)
    }

    /// Weighted sum of integrand values given at the nodes, in node order.
    pub fn integrate_values(&self, values: &[f64]) -> Result<f64> {
        assert_eq!(values.len(), self.nodes.len(), "one value per node");
        let mut terms = Vec::with_capacity(values.len());
        for (i, (&v, &w)) in values.iter().zip(&self.weights).enumerate() {
            if !v.is_finite() {
                let p = self.nodes[i];
                return Err(Error::NonFiniteIntegrand {
                    index: i,
                    x: p.x,
                    y: p.y,
                    value: v,
                });
            }
            terms.push(v * w);
        }
        Ok(pairwise_sum(&terms))
    }

    /// Gauss points on the four sides with outward normals, for boundary integrals.
    pub fn boundary(&self) -> BoundaryRule {
        let (xs, wx) = composite_1d(0.0, 1.0, self.panels_x, self.order);
        let (ys, wy) = composite_1d(-self.a, self.a, self.panels_y, self.order);
        let mut points = Vec::new();
        for (y, w) in ys.iter().zip(&wy) {
            points.push(BoundaryPoint {
                point: Vec2::new(1.0, *y),
                normal: Vec2::new(1.0, 0.0),
                weight: *w,
            });
            points.push(BoundaryPoint {
                point: Vec2::new(0.0, *y),
                normal: Vec2::new(-1.0, 0.0),
                weight: *w,
            });
        }
        for (x, w) in xs.iter().zip(&wx) {
            points.push(BoundaryPoint {
                point: Vec2::new(*x, self.a),
                normal: Vec2::new(0.0, 1.0),
                weight: *w,
            });
            points.push(BoundaryPoint {
                point: Vec2::new(*x, -self.a),
                normal: Vec2::new(0.0, -1.0),
                weight: *w,
            });
        }
        BoundaryRule { points }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint {
    pub point: Vec2,
    pub normal: Vec2,
    pub weight: f64,
}

/// 1D Gauss rule on each side of the rectangle.
#[derive(Clone, Debug)]
pub struct BoundaryRule {
    pub points: Vec<BoundaryPoint>,
}

impl BoundaryRule {
    pub fn integrate(&self, f: impl Fn(&BoundaryPoint) -> f64) -> f64 {
        let terms: Vec<f64> = self.points.iter().map(|bp| bp.weight * f(bp)).collect();
        pairwise_sum(&terms)
    }
}
