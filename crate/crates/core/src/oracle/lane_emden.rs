//! Positive solutions of `−Δu = |u|^{q−2}u` on `(0,1)×(−a,a)` with Dirichlet
//! data, on the 5-point grid. Sobolev-gradient descent on the Nehari manifold
//! gives the start; Newton with GMRES (fast-Poisson preconditioned) polishes it.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Samples, SineSeries};
use crate::forms::norm_pow;
use crate::quadrature::QuadratureRule;

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const MAX_NEWTON: usize = 30;
const STALL_FACTOR: f64 = 1e3;
const POLISH_STEPS: usize = 12;
const ULP_PASSES: usize = 20;
const DESCENT_STEPS: usize = 200;
const DESCENT_TOL: f64 = 1e-6;
const GMRES_RESTART: usize = 60;
const GMRES_TOL: f64 = 1e-13;

/// In-place DST-I of length `n` through an FFT of length `2(n+1)`.
struct Dst {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        Self {
            n,
            fft: planner.plan_fft_forward(2 * (n + 1)),
        }
    }

    /// `x_k ← ∑_{j=1}^{n} x_j sin(πjk/(n+1))`.
    fn apply(&self, x: &mut [f64], buf: &mut [Complex<f64>]) {
        let n = self.n;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for j in 0..n {
            buf[j + 1] = Complex::new(x[j], 0.0);
            buf[2 * n + 1 - j] = Complex::new(-x[j], 0.0);
        }
        self.fft.process(buf);
        for k in 0..n {
            x[k] = -0.5 * buf[k + 1].im;
        }
    }
}

/// Grid geometry and the fast Poisson solver on interior nodes (x fastest).
pub struct PoissonGrid {
    pub a: f64,
    pub mx: usize,
    pub my: usize,
    pub hx: f64,
    pub hy: f64,
    dst_x: Dst,
    dst_y: Dst,
    eig: Vec<f64>,
}

impl PoissonGrid {
    /// `nx × ny` nodes including the boundary.
    pub fn new(a: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Precondition(format!("grid {nx}x{ny} too small")));
        }
        let (mx, my) = (nx - 2, ny - 2);
        let hx = 1.0 / (nx - 1) as f64;
        let hy = 2.0 * a / (ny - 1) as f64;
        let mut planner = FftPlanner::new();
        let dst_x = Dst::new(&mut planner, mx);
        let dst_y = Dst::new(&mut planner, my);
        let mut eig = Vec::with_capacity(mx * my);
        for k in 1..=my {
            let ly = 4.0 / (hy * hy) * (PI * k as f64 / (2.0 * (my + 1) as f64)).sin().powi(2);
            for j in 1..=mx {
                let lx = 4.0 / (hx * hx) * (PI * j as f64 / (2.0 * (mx + 1) as f64)).sin().powi(2);
                eig.push(lx + ly);
            }
        }
        Ok(Self {
            a,
            mx,
            my,
            hx,
            hy,
            dst_x,
            dst_y,
            eig,
        })
    }

    pub fn len(&self) -> usize {
        self.mx * self.my
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// West, east, south, north interior neighbours.
    pub fn neighbors(&self, i: usize) -> [Option<usize>; 4] {
        let (ix, iy) = (i % self.mx, i / self.mx);
        [
            (ix > 0).then(|| i - 1),
            (ix + 1 < self.mx).then(|| i + 1),
            (iy > 0).then(|| i - self.mx),
            (iy + 1 < self.my).then(|| i + self.mx),
        ]
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        let (ix, iy) = (i % self.mx, i / self.mx);
        ((ix + 1) as f64 * self.hx, -self.a + (iy + 1) as f64 * self.hy)
    }

    /// 2D DST-I (unnormalized) in place.
    fn dst2(&self, v: &mut [f64]) {
        let (mx, my) = (self.mx, self.my);
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * (mx.max(my) + 1)];
        for row in v.chunks_mut(mx) {
            self.dst_x.apply(row, &mut buf[..2 * (mx + 1)]);
        }
        let mut col = vec![0.0; my];
        for ix in 0..mx {
            for iy in 0..my {
                col[iy] = v[iy * mx + ix];
            }
            self.dst_y.apply(&mut col, &mut buf[..2 * (my + 1)]);
            for iy in 0..my {
                v[iy * mx + ix] = col[iy];
            }
        }
    }

    /// `(−Δ_h)⁻¹ f`.
    pub fn solve(&self, f: &[f64]) -> Vec<f64> {
        let mut v = f.to_vec();
        self.dst2(&mut v);
        for (x, l) in v.iter_mut().zip(&self.eig) {
            *x /= l;
        }
        self.dst2(&mut v);
        let norm = 4.0 / ((self.mx + 1) * (self.my + 1)) as f64;
        v.iter_mut().for_each(|x| *x *= norm);
        v
    }

    /// `−Δ_h u` with zero boundary values.
    pub fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let (mx, my) = (self.mx, self.my);
        let (cx, cy) = (1.0 / (self.hx * self.hx), 1.0 / (self.hy * self.hy));
        let mut out = vec![0.0; u.len()];
        for iy in 0..my {
            for ix in 0..mx {
                let i = iy * mx + ix;
                let c = u[i];
                let w = if ix > 0 { u[i - 1] } else { 0.0 };
                let e = if ix + 1 < mx { u[i + 1] } else { 0.0 };
                let s = if iy > 0 { u[i - mx] } else { 0.0 };
                let n = if iy + 1 < my { u[i + mx] } else { 0.0 };
                out[i] = cx * (2.0 * c - w - e) + cy * (2.0 * c - s - n);
            }
        }
        out
    }

    /// Interpolating sine coefficients `c_{kl}` of grid values, `k ≤ kx`, `l ≤ ly`.
    pub fn sine_coefficients(&self, u: &[f64], kx: usize, ly: usize) -> Vec<f64> {
        let mut v = u.to_vec();
        self.dst2(&mut v);
        let norm = 4.0 / ((self.mx + 1) * (self.my + 1)) as f64;
        let mut out = vec![0.0; kx * ly];
        for k in 0..kx.min(self.mx) {
            for l in 0..ly.min(self.my) {
                out[k * ly + l] = norm * v[l * self.mx + k];
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Restarted GMRES for `A x = b` with Givens rotations; returns `(x, iterations)`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut total = 0;
    let mut history = Vec::new();
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = dot(&r, &r).sqrt();
        history.push(beta / bnorm);
        if beta <= tol * bnorm {
            return Ok((x, total));
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut steps = 0;
        for j in 0..restart {
            let mut w = apply(&basis[j]);
            for (i, vi) in basis.iter().enumerate() {
                let hij = dot(&w, vi);
                h[i][j] = hij;
                w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= hij * vk);
            }
            let hn = dot(&w, &w).sqrt();
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let d = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            cs[j] = h[j][j] / d;
            sn[j] = h[j + 1][j] / d;
            h[j][j] = d;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            steps = j + 1;
            total += 1;
            if g[j + 1].abs() <= tol * bnorm || hn == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let s: f64 = (i + 1..steps).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, vi) in y.iter().zip(&basis) {
            x.iter_mut().zip(vi).for_each(|(xk, vk)| *xk += yi * vk);
        }
    }
    let ax = apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let rel = dot(&r, &r).sqrt() / bnorm;
    if rel <= tol {
        return Ok((x, total));
    }
    Err(Error::Convergence {
        iterations: total,
        message: format!("GMRES relative residual {rel:e}"),
        trace: history,
    })
}

/// A converged discrete ground state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundStateSolution {
    pub a: f64,
    pub q: f64,
    pub nx: usize,
    pub ny: usize,
    /// Interior values, x fastest.
    pub values: Vec<f64>,
    /// `‖−Δ_h u − |u|^{q−2}u‖_∞`
    pub residual_inf: f64,
    /// `|⟨−Δ_h u, u⟩ − ∑|u|^q| / ⟨−Δ_h u, u⟩`
    pub nehari_defect: f64,
    /// Discrete `(1/2 − 1/q)∑|u|^q h_x h_y`.
    pub energy: f64,
    pub newton_iterations: usize,
    pub descent_steps: usize,
    pub restarts: usize,
    pub damping: Vec<f64>,
}

impl GroundStateSolution {
    /// Truncated sine series of the grid solution, rescaled onto the Nehari
    /// manifold of the continuous energy as measured by `rule`.
    pub fn sine_series(&self, kx: usize, ly: usize, rule: &QuadratureRule) -> Result<SineSeries> {
        let grid = PoissonGrid::new(self.a, self.nx, self.ny)?;
        let coeffs = grid.sine_coefficients(&self.values, kx, ly);
        let raw = SineSeries::new(self.a, kx, ly, coeffs.clone());
        let s = Samples::new(&raw, rule);
        let grad = rule.integrate_values(&s.grads.iter().map(|g| norm_pow(*g, 2.0)).collect::<Vec<_>>())?;
        let mass = rule.integrate_values(&s.values.iter().map(|v| v.abs().powf(self.q)).collect::<Vec<_>>())?;
        let c = (grad / mass).powf(1.0 / (self.q - 2.0));
        Ok(SineSeries::new(self.a, kx, ly, coeffs.into_iter().map(|x| c * x).collect()))
    }
}

fn nonlinearity(u: &[f64], q: f64) -> Vec<f64> {
    u.iter().map(|&v| v.abs().powf(q - 2.0) * v).collect()
}

fn residual(grid: &PoissonGrid, u: &[f64], q: f64) -> Vec<f64> {
    let lap = grid.neg_laplacian(u);
    lap.iter().zip(nonlinearity(u, q)).map(|(l, n)| l - n).collect()
}

fn residual_at(grid: &PoissonGrid, u: &[f64], q: f64, i: usize) -> f64 {
    let (cx, cy) = (1.0 / (grid.hx * grid.hx), 1.0 / (grid.hy * grid.hy));
    let [w, e, s, n] = grid.neighbors(i).map(|j| j.map_or(0.0, |j| u[j]));
    let c = u[i];
    cx * (2.0 * c - w - e) + cy * (2.0 * c - s - n) - c.abs().powf(q - 2.0) * c
}

/// Moves single values by one ulp where that lowers the local residual
/// maximum; reaches below the floor set by rounding the Newton iterate.
fn ulp_polish(grid: &PoissonGrid, u: &mut [f64], q: f64, tol: f64) -> f64 {
    let touched = |j: usize| std::iter::once(Some(j)).chain(grid.neighbors(j)).flatten();
    for _ in 0..ULP_PASSES {
        let r = residual(grid, u, q);
        let bad: Vec<usize> = (0..r.len()).filter(|&i| r[i].abs() > tol).collect();
        if bad.is_empty() {
            break;
        }
        let mut improved = false;
        for i in bad {
            if residual_at(grid, u, q, i).abs() <= tol {
                continue;
            }
            let local = |u: &[f64], j: usize| touched(j).map(|k| residual_at(grid, u, q, k).abs()).fold(0.0, f64::max);
            let mut best: Option<(usize, f64, f64)> = None;
            for j in touched(i) {
                let before = local(u, j);
                let orig = u[j];
                for cand in [orig.next_up(), orig.next_down()] {
                    u[j] = cand;
                    let after = local(u, j);
                    if after < before && best.map_or(true, |b| after < b.2) {
                        best = Some((j, cand, after));
                    }
                }
                u[j] = orig;
            }
            if let Some((j, v, _)) = best {
                u[j] = v;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    norm_inf(&residual(grid, u, q))
}

fn nehari_scale(grid: &PoissonGrid, u: &mut [f64], q: f64) {
    let lap = grid.neg_laplacian(u);
    let g = dot(&lap, u);
    let m: f64 = u.iter().map(|v| v.abs().powf(q)).sum();
    let c = (g / m).powf(1.0 / (q - 2.0));
    u.iter_mut().for_each(|v| *v *= c);
}

/// Positive discrete ground state of `−Δu = |u|^{q−2}u`, `p = 2`.
pub fn lane_emden_ground_state(q: f64, a: f64, nx: usize, ny: usize) -> Result<GroundStateSolution> {
    if !(q > 2.0 && q.is_finite()) {
        return Err(Error::Domain(format!("need 2 < q < p* = inf, got q = {q}")));
    }
    if !(a > 0.0) {
        return Err(Error::Domain(format!("half-height must be positive, got {a}")));
    }
    let grid = PoissonGrid::new(a, nx, ny)?;
    let n = grid.len();
    let mut u: Vec<f64> = (0..n)
        .map(|i| {
            let (x, y) = grid.point(i);
            (PI * x).sin() * (PI * y / (2.0 * a)).cos()
        })
        .collect();
    nehari_scale(&grid, &mut u, q);

    // Sobolev-gradient descent with unit step: u ← P_N (−Δ_h)⁻¹ |u|^{q−2}u
    let mut restarts = 0;
    let mut descent_steps = 0;
    for _ in 0..DESCENT_STEPS {
        let mut next = grid.solve(&nonlinearity(&u, q));
        nehari_scale(&grid, &mut next, q);
        let top = norm_inf(&next);
        if next.iter().any(|&v| v < -1e-12 * top) {
            restarts += 1;
            next.iter_mut().for_each(|v| *v = v.abs());
            nehari_scale(&grid, &mut next, q);
        }
        let change = next.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / top;
        u = next;
        descent_steps += 1;
        if change <= DESCENT_TOL {
            break;
        }
    }

    // Newton, preconditioned by the fast Poisson solver
    let newton_step = |u: &[f64], r: &[f64]| -> Result<Vec<f64>> {
        let weight: Vec<f64> = u.iter().map(|v| (q - 1.0) * v.abs().powf(q - 2.0)).collect();
        let apply = |d: &[f64]| -> Vec<f64> {
            let wd: Vec<f64> = d.iter().zip(&weight).map(|(a, b)| a * b).collect();
            let pw = grid.solve(&wd);
            d.iter().zip(&pw).map(|(a, b)| a - b).collect()
        };
        let rhs: Vec<f64> = grid.solve(r).iter().map(|v| -v).collect();
        Ok(gmres(apply, &rhs, GMRES_RESTART, GMRES_TOL, 20 * GMRES_RESTART)?.0)
    };
    let mut damping = Vec::new();
    let mut r = residual(&grid, &u, q);
    let mut rnorm = norm_inf(&r);
    let mut iterations = 0;
    let mut stalled = false;
    while rnorm > RESIDUAL_TOL && iterations < MAX_NEWTON && !stalled {
        iterations += 1;
        let delta = newton_step(&u, &r)?;
        let mut tau = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + tau * b).collect();
            let tr = residual(&grid, &trial, q);
            let tn = norm_inf(&tr);
            if tn < (1.0 - 1e-4 * tau) * rnorm || tn <= RESIDUAL_TOL {
                damping.push(tau);
                u = trial;
                r = tr;
                rnorm = tn;
                break;
            }
            tau *= 0.5;
            if tau < 1.0 / 1024.0 {
                damping.push(tau);
                if rnorm <= STALL_FACTOR * RESIDUAL_TOL {
                    stalled = true;
                    break;
                }
                return Err(Error::Solver {
                    message: format!("line search failed at residual {rnorm:e}"),
                    damping,
                });
            }
        }
    }
    // At the rounding floor further full steps only re-round u; keep the best.
    if stalled {
        let (mut cur, mut cur_r) = (u.clone(), r.clone());
        for _ in 0..POLISH_STEPS {
            iterations += 1;
            let delta = newton_step(&cur, &cur_r)?;
            cur.iter_mut().zip(&delta).for_each(|(a, b)| *a += b);
            cur_r = residual(&grid, &cur, q);
            let n = norm_inf(&cur_r);
            damping.push(1.0);
            if n < rnorm {
                u.clone_from(&cur);
                rnorm = n;
            }
            if rnorm <= RESIDUAL_TOL {
                break;
            }
        }
    }
    if stalled && rnorm > RESIDUAL_TOL {
        rnorm = ulp_polish(&grid, &mut u, q, 0.5 * RESIDUAL_TOL);
    }
    if rnorm > RESIDUAL_TOL && !stalled {
        return Err(Error::Solver {
            message: format!("no convergence after {iterations} Newton steps, residual {rnorm:e}"),
            damping,
        });
    }
    if u.iter().any(|&v| v < 0.0) {
        return Err(Error::Solver {
            message: "Newton iterate changed sign".into(),
            damping,
        });
    }
    let lap = grid.neg_laplacian(&u);
    let g = dot(&lap, &u);
    let m: f64 = u.iter().map(|v| v.abs().powf(q)).sum();
    Ok(GroundStateSolution {
        a,
        q,
        nx,
        ny,
        energy: (0.5 - 1.0 / q) * m * grid.hx * grid.hy,
        nehari_defect: (g - m).abs() / g,
        residual_inf: rnorm,
        values: u,
        newton_iterations: iterations,
        descent_steps,
        restarts,
        damping,
    })
}
