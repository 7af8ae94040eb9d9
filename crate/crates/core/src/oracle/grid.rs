//! Bilinear finite elements for `λ₁(Ω_t)`, pulled back to the reference
//! rectangle: `∫ (φ_t Ψ_tΨ_tᵀ ∇w, ∇w) / ∫ φ_t w²`.

use crate::error::{Error, Result};
use crate::kinematics::DeformationField;
use crate::quadrature::gauss_legendre;
use crate::Vec2;

pub const MIN_GRID: usize = 32;
pub const EIGEN_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 500;
const SHIFT_FRACTION: f64 = 0.9;
const SHIFT_ATTEMPTS: usize = 6;

/// The pulled-back Dirichlet eigenproblem on an `nx × ny` node grid (boundary included).
#[derive(Clone, Debug)]
pub struct GridProblem {
    pub a: f64,
    pub nx: usize,
    pub ny: usize,
    pub t: f64,
    pub field: DeformationField,
}

impl GridProblem {
    pub fn new(a: f64, nx: usize, ny: usize, t: f64, field: DeformationField) -> Self {
        Self { a, nx, ny, t, field }
    }

    pub fn reference(a: f64, nx: usize, ny: usize) -> Self {
        Self::new(a, nx, ny, 0.0, DeformationField::zero())
    }
}

/// Symmetric band matrix, lower band stored row by row: entry `(i, j)`,
/// `i − b ≤ j ≤ i`, lives at `i·(b+1) + j + b − i`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub n: usize,
    pub b: usize,
    pub data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self {
            n,
            b,
            data: vec![0.0; n * (b + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.b);
        i * (self.b + 1) + j + self.b - i
    }

    /// Adds to `(i, j)` of the symmetric matrix; only the lower triangle is kept.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.b {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.b);
            let row = &self.data[i * (self.b + 1)..(i + 1) * (self.b + 1)];
            let off = self.b + lo - i;
            for (k, j) in (lo..=i).enumerate() {
                let v = row[off + k];
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// In-place Cholesky `A = LLᵀ`.
    pub fn cholesky(mut self) -> Result<BandCholesky> {
        let b = self.b;
        let w = b + 1;
        for i in 0..self.n {
            let lo_i = i.saturating_sub(b);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(b));
                let ri = i * w + b - i;
                let rj = j * w + b - j;
                let dot: f64 = self.data[ri + lo..ri + j]
                    .iter()
                    .zip(&self.data[rj + lo..rj + j])
                    .map(|(x, y)| x * y)
                    .sum();
                let s = self.data[ri + j] - dot;
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Singular(format!(
                            "matrix is not positive definite at row {i} (pivot {s:e})"
                        )));
                    }
                    self.data[ri + i] = s.sqrt();
                } else {
                    self.data[ri + j] = s / self.data[rj + j];
                }
            }
        }
        Ok(BandCholesky { l: self })
    }
}

pub struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let (n, b, w) = (l.n, l.b, l.b + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let ri = i * w + b - i;
            let mut s = y[i];
            for k in lo..i {
                s -= l.data[ri + k] * y[k];
            }
            y[i] = s / l.data[ri + i];
        }
        for i in (0..n).rev() {
            y[i] /= l.data[i * w + b];
            let lo = i.saturating_sub(b);
            let ri = i * w + b - i;
            let yi = y[i];
            for k in lo..i {
                y[k] -= l.data[ri + k] * yi;
            }
        }
        y
    }
}

/// Stiffness and mass matrices of the pulled-back problem on interior nodes.
pub fn assemble(problem: &GridProblem) -> Result<(BandMatrix, BandMatrix)> {
    let GridProblem { a, nx, ny, t, ref field } = *problem;
    if nx < MIN_GRID || ny < MIN_GRID {
        return Err(Error::Precondition(format!(
            "grid {nx}x{ny} is below the minimum {MIN_GRID}x{MIN_GRID}"
        )));
    }
    let (mx, my) = (nx - 2, ny - 2);
    let n = mx * my;
    let b = mx + 1;
    let hx = 1.0 / (nx - 1) as f64;
    let hy = 2.0 * a / (ny - 1) as f64;
    let (gx, gw) = gauss_legendre(3);
    let mut k_mat = BandMatrix::zeros(n, b);
    let mut m_mat = BandMatrix::zeros(n, b);
    let index = |ix: usize, iy: usize| -> Option<usize> {
        if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
            None
        } else {
            Some((iy - 1) * mx + (ix - 1))
        }
    };
    // local node order: (0,0), (1,0), (0,1), (1,1)
    const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];
    for ey in 0..ny - 1 {
        for ex in 0..nx - 1 {
            let ids: Vec<Option<usize>> = CORNERS.iter().map(|&(dx, dy)| index(ex + dx, ey + dy)).collect();
            if ids.iter().all(Option::is_none) {
                continue;
            }
            let mut ke = [[0.0; 4]; 4];
            let mut me = [[0.0; 4]; 4];
            for (xi, wxi) in gx.iter().zip(&gw) {
                for (eta, weta) in gx.iter().zip(&gw) {
                    let s = 0.5 * (xi + 1.0);
                    let r = 0.5 * (eta + 1.0);
                    let p = Vec2::new((ex as f64 + s) * hx, -a + (ey as f64 + r) * hy);
                    let jac = field.jacobian_t(p, t);
                    let phi = jac.determinant();
                    if !(phi > 0.0) {
                        return Err(Error::Fold { x: p.x, y: p.y, det: phi });
                    }
                    let psi = jac
                        .try_inverse()
                        .ok_or_else(|| Error::Singular("singular deformation gradient".into()))?;
                    let coef = phi * psi * psi.transpose();
                    let w = 0.25 * wxi * weta * hx * hy;
                    let shape = [(1.0 - s) * (1.0 - r), s * (1.0 - r), (1.0 - s) * r, s * r];
                    let grads = [
                        Vec2::new(-(1.0 - r) / hx, -(1.0 - s) / hy),
                        Vec2::new((1.0 - r) / hx, -s / hy),
                        Vec2::new(-r / hx, (1.0 - s) / hy),
                        Vec2::new(r / hx, s / hy),
                    ];
                    for i in 0..4 {
                        let ag = coef * grads[i];
                        for j in 0..4 {
                            ke[i][j] += w * ag.dot(&grads[j]);
                            me[i][j] += w * phi * shape[i] * shape[j];
                        }
                    }
                }
            }
            for i in 0..4 {
                let Some(gi) = ids[i] else { continue };
                for j in 0..4 {
                    let Some(gj) = ids[j] else { continue };
                    if gj <= gi {
                        k_mat.add(gi, gj, ke[i][j]);
                        m_mat.add(gi, gj, me[i][j]);
                    }
                }
            }
        }
    }
    Ok((k_mat, m_mat))
}

/// Cholesky factor of `K − σM` with `σ` below `λ₁`, started from a fraction
/// of the Rayleigh quotient of `x` and halved until the factorization succeeds.
fn shifted_factor(k_mat: &BandMatrix, m_mat: &BandMatrix, x: &[f64]) -> Result<BandCholesky> {
    let kx = k_mat.matvec(x);
    let mx = m_mat.matvec(x);
    let rq = x.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>() / x.iter().zip(&mx).map(|(a, b)| a * b).sum::<f64>();
    let mut sigma = SHIFT_FRACTION * rq;
    for _ in 0..SHIFT_ATTEMPTS {
        let mut shifted = k_mat.clone();
        shifted.data.iter_mut().zip(&m_mat.data).for_each(|(k, m)| *k -= sigma * m);
        match shifted.cholesky() {
            Ok(c) => return Ok(c),
            Err(Error::Singular(_)) => sigma *= 0.5,
            Err(e) => return Err(e),
        }
    }
    k_mat.clone().cholesky()
}

/// Smallest eigenvalue with its eigenvector, by shifted inverse iteration with Rayleigh quotients.
pub fn grid_eigenpair(problem: &GridProblem) -> Result<(f64, Vec<f64>)> {
    let (k_mat, m_mat) = assemble(problem)?;
    let (mx, my) = (problem.nx - 2, problem.ny - 2);
    // positive start vector close to the ground state
    let mut x: Vec<f64> = (0..my)
        .flat_map(|iy| {
            (0..mx).map(move |ix| {
                let s = (ix + 1) as f64 / (mx + 1) as f64;
                let r = (iy + 1) as f64 / (my + 1) as f64;
                (std::f64::consts::PI * s).sin() * (std::f64::consts::PI * r).sin()
            })
        })
        .collect();
    let chol = shifted_factor(&k_mat, &m_mat, &x)?;
    let mut lambda = f64::INFINITY;
    let mut trace = Vec::new();
    for it in 0..MAX_ITERATIONS {
        let mx_vec = m_mat.matvec(&x);
        let y = chol.solve(&mx_vec);
        let ky = k_mat.matvec(&y);
        let my_vec = m_mat.matvec(&y);
        let num: f64 = y.iter().zip(&ky).map(|(a, b)| a * b).sum();
        let den: f64 = y.iter().zip(&my_vec).map(|(a, b)| a * b).sum();
        let next = num / den;
        let norm = den.sqrt();
        x = y.iter().map(|v| v / norm).collect();
        trace.push(next);
        if (next - lambda).abs() <= EIGEN_TOL * next.abs().max(1.0) {
            return Ok((next, x));
        }
        lambda = next;
        if it + 1 == MAX_ITERATIONS {
            break;
        }
    }
    let tail = trace.split_off(trace.len().saturating_sub(10));
    Err(Error::Convergence {
        iterations: MAX_ITERATIONS,
        message: "inverse iteration stagnated".into(),
        trace: tail,
    })
}

/// `λ₁` of the discretized pulled-back problem.
pub fn grid_lambda1(problem: &GridProblem) -> Result<f64> {
    Ok(grid_eigenpair(problem)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{FnVectorField, Profile};
    use crate::spectral::lambda1;
    use crate::Mat2;

    #[test]
    fn band_cholesky_solves() {
        let n = 12;
        let b = 3;
        let mut m = BandMatrix::zeros(n, b);
        for i in 0..n {
            m.add(i, i, 4.0 + i as f64 * 0.1);
            for d in 1..=b.min(i) {
                m.add(i, i - d, -0.5 / d as f64);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let rhs = m.matvec(&x);
        let sol = m.clone().cholesky().unwrap().solve(&rhs);
        for (a, b) in sol.iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(m.get(0, 5), 0.0);
    }

    #[test]
    fn reference_rectangle_converges() {
        let exact = lambda1(1.0).unwrap();
        let coarse = grid_lambda1(&GridProblem::reference(1.0, 33, 33)).unwrap();
        let fine = grid_lambda1(&GridProblem::reference(1.0, 65, 65)).unwrap();
        assert!(coarse > fine && fine > exact);
        let order = ((coarse - exact) / (fine - exact)).log2();
        assert!(order >= 1.9, "{order}");
    }

    #[test]
    fn coarse_grid_rejected() {
        let err = grid_lambda1(&GridProblem::reference(1.0, 16, 16)).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn folding_detected() {
        let field = DeformationField::new(
            FnVectorField::new(|p| Vec2::new(-p.x, 0.0)).with_jacobian(|_| Mat2::new(-1.0, 0.0, 0.0, 0.0)),
        );
        let err = grid_lambda1(&GridProblem::new(1.0, 33, 33, 1.5, field)).unwrap_err();
        assert!(matches!(err, Error::Fold { .. }));
    }

    #[test]
    fn dilation_scales_eigenvalue() {
        // Φ_t(x) = (1+t)x maps the rectangle onto one scaled by 1+t
        let t = 0.1;
        let field = DeformationField::new(
            FnVectorField::new(|p| p).with_jacobian(|_| Mat2::identity()),
        );
        let base = grid_lambda1(&GridProblem::reference(1.0, 33, 33)).unwrap();
        let moved = grid_lambda1(&GridProblem::new(1.0, 33, 33, t, field)).unwrap();
        assert!((moved * (1.0 + t) * (1.0 + t) - base).abs() <= 1e-9 * base);
        let _ = Profile::Linear;
    }
}
