//! Self-consistent dressed free Dirac operator under a sharp momentum cutoff.
//!
//! 𝒟⁰(p) = β g₀(|p|) + p̂·α g₁(|p|). After the angular integration the
//! self-consistent equation becomes two 1D integral equations with
//! logarithmic kernels, discretized by product integration of hat functions
//! on a geometric radial grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bdf_operators::ExternalDensity;
use crate::clifford::DiracElement;
use crate::error::{BdfError, Result};
use crate::quadrature::{adaptive, CubicSpline, GaussLegendre, SplineEnd};

pub const MIN_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub alpha: f64,
    pub lambda: f64,
    /// Electron count M.
    pub electrons: usize,
    /// External charge Z = ∫ν.
    pub z: f64,
    pub nu: ExternalDensity,
}

impl PhysicalParams {
    pub fn new(alpha: f64, lambda: f64) -> Self {
        Self { alpha, lambda, electrons: 0, z: 0.0, nu: ExternalDensity::None }
    }

    /// L = α ln Λ.
    pub fn l(&self) -> f64 {
        self.alpha * self.lambda.ln()
    }

    pub fn small_alpha(&self) -> bool {
        self.alpha <= 0.1
    }

    pub fn small_l(&self) -> bool {
        self.l() <= 0.3
    }

    pub fn in_regime(&self) -> bool {
        self.small_alpha() && self.small_l()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(BdfError::InvalidInput(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.lambda > 1.0) || !self.lambda.is_finite() {
            return Err(BdfError::InvalidInput(format!("lambda must be > 1, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn regime_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.small_alpha() {
            w.push(format!("alpha = {} is above 0.1", self.alpha));
        }
        if !self.small_l() {
            w.push(format!("L = alpha ln(lambda) = {:.4} is above 0.3", self.l()));
        }
        w
    }
}

/// Free dispersion E(p) = √(1+p²).
pub fn free_energy(p: f64) -> f64 {
    (1.0 + p * p).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressOptions {
    pub nodes: usize,
    /// Smallest non-zero grid momentum.
    pub p_min: f64,
    /// Linear mixing θ ∈ (0, 1]; 1 is plain Picard.
    pub mixing: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DressOptions {
    fn default() -> Self {
        Self { nodes: 512, p_min: 1e-3, mixing: 1.0, tol: 1e-10, max_iter: 50 }
    }
}

/// Radial quantities at one momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radial {
    pub g0: f64,
    pub g1: f64,
    /// ℰ = √(g₀² + g₁²).
    pub e: f64,
}

impl Radial {
    /// Components of the unit 4-vector (g₀, g₁)/ℰ.
    pub fn a(&self) -> f64 {
        self.g0 / self.e
    }
    pub fn h(&self) -> f64 {
        self.g1 / self.e
    }
}

#[derive(Debug, Clone)]
pub struct DressedDirac {
    pub alpha: f64,
    pub lambda: f64,
    pub grid: Vec<f64>,
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
    /// inf of ℰ over the grid.
    pub m: f64,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    s0: CubicSpline,
    s1: CubicSpline,
}

/// Geometric grid: 0 followed by `nodes − 1` points from `p_min` to `lambda`.
pub fn radial_grid(nodes: usize, p_min: f64, lambda: f64) -> Vec<f64> {
    let n = nodes - 1;
    let ratio = (lambda / p_min).ln() / (n - 1) as f64;
    let mut g = Vec::with_capacity(nodes);
    g.push(0.0);
    for i in 0..n {
        g.push(p_min * (ratio * i as f64).exp());
    }
    g[nodes - 1] = lambda;
    g
}

/// (1+r²) artanh(r) − r, with a series below r = 0.3 to avoid cancellation.
fn phi_small(r: f64) -> f64 {
    if r < 0.3 {
        let r2 = r * r;
        let mut term = r * r2;
        let mut s = 0.0;
        let mut k = 1.0f64;
        loop {
            let c = 1.0 / (2.0 * k + 1.0) + 1.0 / (2.0 * k - 1.0);
            let add = term * c;
            s += add;
            if add.abs() < 1e-18 * s.abs() {
                break;
            }
            term *= r2;
            k += 1.0;
        }
        s
    } else {
        (1.0 + r * r) * r.atanh() - r
    }
}

/// ln|(p+q)/(p−q)| computed without forming the ratio.
fn log_kernel(p: f64, q: f64) -> f64 {
    ((p + q) / (p - q).abs()).ln()
}

/// Kernel of the g₀ equation (without α/2π): (q/p) ln|(p+q)/(p−q)|.
pub fn kernel0(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return 2.0;
    }
    if q == 0.0 {
        return 0.0;
    }
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let r = lo / hi;
    if r < 0.3 {
        // 2 artanh(r) by series.
        (q / p) * 2.0 * (r + r.powi(3) / 3.0 + r.powi(5) / 5.0 + r.powi(7) / 7.0 + r.powi(9) / 9.0
            + r.powi(11) / 11.0 + r.powi(13) / 13.0 + r.powi(15) / 15.0 + r.powi(17) / 17.0
            + r.powi(19) / 19.0 + r.powi(21) / 21.0 + r.powi(23) / 23.0 + r.powi(25) / 25.0
            + r.powi(27) / 27.0 + r.powi(29) / 29.0 + r.powi(31) / 31.0 + r.powi(33) / 33.0)
    } else {
        (q / p) * log_kernel(p, q)
    }
}

/// Kernel of the g₁ equation (without α/2π): (p²+q²)L/(2p²) − q/p.
pub fn kernel1(p: f64, q: f64) -> f64 {
    if p == 0.0 || q == 0.0 {
        return 0.0;
    }
    if p < q {
        let r = p / q;
        phi_small(r) / (r * r)
    } else {
        phi_small(q / p)
    }
}

/// Product-integration weights W[i][j] = ∫ φ_j(q) K(p_i, q) dq for hat functions φ_j.
fn product_weights(grid: &[f64], kernel: fn(f64, f64) -> f64) -> DMatrix<f64> {
    let n = grid.len();
    let gl = GaussLegendre::new(12);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = grid[i];
            let mut row = vec![0.0; n];
            for j in 0..n - 1 {
                let (a, b) = (grid[j], grid[j + 1]);
                let h = b - a;
                let near = p > 0.0 && (j + 4 > i && j < i + 4);
                let (wl, wr) = if !near {
                    let mut wl = 0.0;
                    let mut wr = 0.0;
                    for (q, w) in gl.on(a, b) {
                        let k = kernel(p, q) * w;
                        let t = (q - a) / h;
                        wl += k * (1.0 - t);
                        wr += k * t;
                    }
                    (wl, wr)
                } else if p == a || p == b {
                    // q = p ± h u²: the log singularity becomes u·ln u.
                    let left = p == a;
                    let f = |u: f64, right_shape: bool| {
                        let q = if left { a + h * u * u } else { b - h * u * u };
                        let t = ((q - a) / h).clamp(0.0, 1.0);
                        let shape = if right_shape { t } else { 1.0 - t };
                        kernel(p, q) * shape * 2.0 * h * u
                    };
                    let wl = adaptive(|u| f(u, false), 0.0, 1.0, 1e-15, 1e-12)
                        .map(|e| e.value)
                        .unwrap_or_else(|_| gl.integrate(0.0, 1.0, |u| f(u, false)));
                    let wr = adaptive(|u| f(u, true), 0.0, 1.0, 1e-15, 1e-12)
                        .map(|e| e.value)
                        .unwrap_or_else(|_| gl.integrate(0.0, 1.0, |u| f(u, true)));
                    (wl, wr)
                } else {
                    let fl = |q: f64| kernel(p, q) * (b - q) / h;
                    let fr = |q: f64| kernel(p, q) * (q - a) / h;
                    let wl = adaptive(fl, a, b, 1e-15, 1e-12).map(|e| e.value).unwrap_or(0.0);
                    let wr = adaptive(fr, a, b, 1e-15, 1e-12).map(|e| e.value).unwrap_or(0.0);
                    (wl, wr)
                };
                row[j] += wl;
                row[j + 1] += wr;
            }
            row
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

impl DressedDirac {
    /// Free operator: g₀ ≡ 1, g₁(p) = |p|.
    pub fn free(lambda: f64) -> Self {
        let grid = radial_grid(MIN_NODES, 1e-3, lambda);
        let g0 = vec![1.0; grid.len()];
        let g1 = grid.clone();
        Self::from_samples(0.0, lambda, grid, g0, g1, 0, 0.0, Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    fn from_samples(
        alpha: f64,
        lambda: f64,
        grid: Vec<f64>,
        g0: Vec<f64>,
        g1: Vec<f64>,
        iterations: usize,
        residual: f64,
        residual_history: Vec<f64>,
    ) -> Self {
        let s0 = CubicSpline::new(&grid, &g0, SplineEnd::Clamped(0.0), SplineEnd::Natural);
        let s1 = CubicSpline::new(&grid, &g1, SplineEnd::Natural, SplineEnd::Natural);
        let m = g0
            .iter()
            .zip(&g1)
            .map(|(a, b)| a.hypot(*b))
            .fold(f64::INFINITY, f64::min);
        Self { alpha, lambda, grid, g0, g1, m, iterations, residual, residual_history, s0, s1 }
    }

    pub fn check_cutoff(&self, p: &[f64; 3]) -> Result<()> {
        let r = norm3(p);
        if r > self.lambda * (1.0 + 1e-12) {
            return Err(BdfError::CutoffViolation { p: r, lambda: self.lambda });
        }
        Ok(())
    }

    /// Interpolated (g₀, g₁, ℰ) at radius r ∈ [0, Λ].
    pub fn radial(&self, r: f64) -> Radial {
        let g0 = self.s0.eval(r);
        let g1 = if r == 0.0 { 0.0 } else { self.s1.eval(r) };
        Radial { g0, g1, e: g0.hypot(g1) }
    }

    /// (g₀, g₀′, g₁, g₁′) at radius r.
    pub fn radial_with_derivatives(&self, r: f64) -> (f64, f64, f64, f64) {
        let (g0, d0, _) = self.s0.eval_all(r);
        let (g1, d1, _) = self.s1.eval_all(r);
        (g0, d0, if r == 0.0 { 0.0 } else { g1 }, d1)
    }

    pub fn script_e(&self, r: f64) -> f64 {
        self.radial(r).e
    }

    /// Unit 4-vector σ_p = (g₀, g₁ p̂)/ℰ, so that s_p = σ_p·(β, α).
    pub fn sign_vector(&self, p: &[f64; 3]) -> Result<[f64; 4]> {
        self.check_cutoff(p)?;
        Ok(self.sign_vector_unchecked(p))
    }

    pub fn sign_vector_unchecked(&self, p: &[f64; 3]) -> [f64; 4] {
        let r = norm3(p);
        let rad = self.radial(r);
        let a = rad.a();
        if r == 0.0 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        let h = rad.h() / r;
        [a, h * p[0], h * p[1], h * p[2]]
    }

    /// Directional derivative ∂_e σ at momentum u.
    pub fn sign_vector_derivative(&self, u: &[f64; 3], e: &[f64; 3]) -> [f64; 4] {
        let r = norm3(u);
        let (g0, d0, g1, d1) = self.radial_with_derivatives(r);
        let en = g0.hypot(g1);
        // a = g₀/ℰ, h = g₁/ℰ and their radial derivatives.
        let de = (g0 * d0 + g1 * d1) / en;
        let da = (d0 - g0 * de / en) / en;
        let dh = (d1 - g1 * de / en) / en;
        if r == 0.0 {
            // h(r)/r → h'(0); the radial part has no direction.
            return [0.0, dh * e[0], dh * e[1], dh * e[2]];
        }
        let uh = [u[0] / r, u[1] / r, u[2] / r];
        let ue = uh[0] * e[0] + uh[1] * e[1] + uh[2] * e[2];
        let h_over_r = g1 / en / r;
        [
            da * ue,
            dh * ue * uh[0] + h_over_r * (e[0] - ue * uh[0]),
            dh * ue * uh[1] + h_over_r * (e[1] - ue * uh[1]),
            dh * ue * uh[2] + h_over_r * (e[2] - ue * uh[2]),
        ]
    }

    /// 𝒟⁰(p) as a 4×4 matrix.
    pub fn dirac_matrix(&self, p: &[f64; 3]) -> Result<DiracElement> {
        self.check_cutoff(p)?;
        let r = norm3(p);
        let rad = self.radial(r);
        let v = if r == 0.0 {
            [rad.g0, 0.0, 0.0, 0.0]
        } else {
            [rad.g0, rad.g1 * p[0] / r, rad.g1 * p[1] / r, rad.g1 * p[2] / r]
        };
        Ok(crate::clifford::slash(&v))
    }

    /// Check |p| ≤ g₁ ≤ g₀|p| and 1 ≤ g₀ node by node; report the fitted C in g₀ ≤ 1 + C α ln Λ.
    pub fn gstar_report(&self) -> GstarReport {
        let tol = 1e-12;
        let mut violations = 0;
        let mut max_excess: f64 = 0.0;
        for ((&p, &g0), &g1) in self.grid.iter().zip(&self.g0).zip(&self.g1) {
            let ok = p <= g1 + tol * (1.0 + p)
                && g1 <= g0 * p + tol * (1.0 + p)
                && g0 >= 1.0 - tol;
            if !ok {
                violations += 1;
            }
            max_excess = max_excess.max(g0 - 1.0);
        }
        let l = self.alpha * self.lambda.ln();
        let fitted_c = if l > 0.0 { max_excess / l } else { 0.0 };
        let e_ok = self.g0.iter().zip(&self.g1).all(|(a, b)| a.hypot(*b) >= 1.0 - tol);
        GstarReport { violations, fitted_c, script_e_at_least_one: e_ok }
    }

    /// Finite-difference bounds on derivatives of g₀ and g₁ over the grid.
    pub fn smoothness_probe(&self, order: u8) -> SmoothnessReport {
        let x = &self.grid;
        let n = x.len();
        let mut max_dg0: f64 = 0.0;
        let mut max_dg1: f64 = 0.0;
        for i in 1..n - 1 {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let (d0, d1) = match order {
                1 => (
                    three_point_first(&self.g0, i, h0, h1),
                    three_point_first(&self.g1, i, h0, h1) - 1.0,
                ),
                _ => (
                    three_point_second(&self.g0, i, h0, h1),
                    three_point_second(&self.g1, i, h0, h1),
                ),
            };
            max_dg0 = max_dg0.max(d0.abs());
            max_dg1 = max_dg1.max(d1.abs());
        }
        let l = self.alpha * self.lambda.ln();
        SmoothnessReport {
            order,
            max_dg0,
            max_dg1,
            dg0_over_alpha: if self.alpha > 0.0 { max_dg0 / self.alpha } else { 0.0 },
            dg1_over_l: if l > 0.0 { max_dg1 / l } else { 0.0 },
        }
    }
}

fn three_point_first(y: &[f64], i: usize, h0: f64, h1: f64) -> f64 {
    (-h1 / (h0 * (h0 + h1))) * y[i - 1] + ((h1 - h0) / (h0 * h1)) * y[i]
        + (h0 / (h1 * (h0 + h1))) * y[i + 1]
}

fn three_point_second(y: &[f64], i: usize, h0: f64, h1: f64) -> f64 {
    2.0 * (y[i - 1] / (h0 * (h0 + h1)) - y[i] / (h0 * h1) + y[i + 1] / (h1 * (h0 + h1)))
}

pub fn norm3(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GstarReport {
    pub violations: usize,
    pub fitted_c: f64,
    pub script_e_at_least_one: bool,
}

impl GstarReport {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.script_e_at_least_one
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub order: u8,
    /// max |g₀′| (order 1) or max |g₀″| (order 2).
    pub max_dg0: f64,
    /// max |g₁′ − 1| (order 1) or max |g₁″| (order 2).
    pub max_dg1: f64,
    pub dg0_over_alpha: f64,
    pub dg1_over_l: f64,
}

/// Solve the self-consistent equation with default grid options.
pub fn dress(params: &PhysicalParams, tol: f64, max_iter: usize) -> Result<DressedDirac> {
    dress_with(params, &DressOptions { tol, max_iter, ..DressOptions::default() })
}

pub fn dress_with(params: &PhysicalParams, opts: &DressOptions) -> Result<DressedDirac> {
    params.validate()?;
    if opts.nodes < MIN_NODES {
        return Err(BdfError::Resolution { nodes: opts.nodes, min: MIN_NODES });
    }
    if !(opts.tol > 0.0) {
        return Err(BdfError::InvalidInput("tol must be positive".into()));
    }
    if !(opts.mixing > 0.0 && opts.mixing <= 1.0) {
        return Err(BdfError::InvalidInput("mixing must lie in (0, 1]".into()));
    }
    if !(opts.p_min > 0.0 && opts.p_min < params.lambda) {
        return Err(BdfError::InvalidInput("p_min must lie in (0, lambda)".into()));
    }
    let grid = radial_grid(opts.nodes, opts.p_min, params.lambda);
    let n = grid.len();
    let alpha = params.alpha;
    let mut g0 = vec![1.0; n];
    let mut g1 = grid.clone();
    let mut history = Vec::new();
    if alpha == 0.0 {
        history.push(0.0);
        return Ok(DressedDirac::from_samples(alpha, params.lambda, grid, g0, g1, 1, 0.0, history));
    }
    let w0 = product_weights(&grid, kernel0);
    let w1 = product_weights(&grid, kernel1);
    let c = alpha / (2.0 * PI);
    let theta = opts.mixing;
    for it in 1..=opts.max_iter {
        let e: Vec<f64> = g0.iter().zip(&g1).map(|(a, b)| a.hypot(*b)).collect();
        let h0 = nalgebra::DVector::from_iterator(n, g0.iter().zip(&e).map(|(g, e)| g / e));
        let h1 = nalgebra::DVector::from_iterator(n, g1.iter().zip(&e).map(|(g, e)| g / e));
        let t0 = &w0 * h0;
        let t1 = &w1 * h1;
        let mut res: f64 = 0.0;
        for i in 0..n {
            let n0 = 1.0 + c * t0[i];
            let n1 = if i == 0 { 0.0 } else { grid[i] + c * t1[i] };
            let m0 = (1.0 - theta) * g0[i] + theta * n0;
            let m1 = (1.0 - theta) * g1[i] + theta * n1;
            res = res.max((m0 - g0[i]).abs()).max((m1 - g1[i]).abs() / grid[i].max(1.0));
            g0[i] = m0;
            g1[i] = m1;
        }
        history.push(res);
        if res < opts.tol {
            return Ok(DressedDirac::from_samples(alpha, params.lambda, grid, g0, g1, it, res, history));
        }
        if !res.is_finite() {
            break;
        }
    }
    Err(BdfError::Divergence {
        iterations: opts.max_iter,
        last: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Projector (I ± s_p)/2 onto the positive (+) or negative (−) spectral subspace.
pub fn projector_kernel(p: &[f64; 3], positive: bool, dressed: &DressedDirac) -> Result<DiracElement> {
    let s = crate::clifford::sign_matrix(p, dressed)?;
    let id = DiracElement::identity();
    let m = if positive { &id + &s } else { &id - &s };
    Ok(DiracElement::new(m.entries * num_complex::Complex64::from(0.5), crate::clifford::Grading::Mixed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernels_match_direct_formulas_away_from_cancellation() {
        for &(p, q) in &[(1.0, 2.0), (3.0, 0.7), (0.5, 0.49), (10.0, 12.0)] {
            let l = ((p + q) / (p - q as f64).abs()).ln();
            assert_relative_eq!(kernel0(p, q), q / p * l, max_relative = 1e-12);
            let direct = (p * p + q * q) * l / (2.0 * p * p) - q / p;
            assert_relative_eq!(kernel1(p, q), direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn kernel1_small_ratio_limit() {
        // (4/3) p/q for p ≪ q, (4/3)(q/p)³ for q ≪ p.
        assert_relative_eq!(kernel1(1e-6, 1.0), 4.0 / 3.0 * 1e-6, max_relative = 1e-10);
        assert_relative_eq!(kernel1(1.0, 1e-3), 4.0 / 3.0 * 1e-9, max_relative = 1e-5);
    }

    #[test]
    fn weights_integrate_constants() {
        // ∫₀^Λ K0(p, q) dq has the closed form via ∫ q L dq.
        let grid = radial_grid(200, 1e-3, 50.0);
        let w = product_weights(&grid, kernel0);
        let i = 120;
        let p = grid[i];
        let row: f64 = (0..grid.len()).map(|j| w[(i, j)]).sum();
        let exact = adaptive(|q| kernel0(p, q), 0.0, p, 1e-14, 1e-12).unwrap().value
            + adaptive(|q| kernel0(p, q), p, 50.0, 1e-14, 1e-12).unwrap().value;
        assert_relative_eq!(row, exact, max_relative = 1e-9);
    }

    #[test]
    fn zero_coupling_is_free() {
        let d = dress(&PhysicalParams::new(0.0, 100.0), 1e-10, 5).unwrap();
        assert_eq!(d.iterations, 1);
        for (p, (&g0, &g1)) in d.grid.iter().zip(d.g0.iter().zip(&d.g1)) {
            assert_eq!(g0, 1.0);
            assert_eq!(g1, *p);
        }
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let opts = DressOptions { nodes: 32, ..DressOptions::default() };
        let r = dress_with(&PhysicalParams::new(0.01, 100.0), &opts);
        assert!(matches!(r, Err(BdfError::Resolution { .. })));
    }

    #[test]
    fn tiny_iteration_budget_reports_history() {
        let r = dress(&PhysicalParams::new(0.05, 1e3), 1e-14, 2);
        match r {
            Err(BdfError::Divergence { history, .. }) => assert_eq!(history.len(), 2),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn free_sign_matrix_at_origin_is_beta() {
        let d = DressedDirac::free(10.0);
        let s = crate::clifford::sign_matrix(&[0.0; 3], &d).unwrap();
        assert_eq!(s.entries, crate::clifford::make_dirac_basis().beta.entries);
    }

    #[test]
    fn cutoff_is_enforced() {
        let d = DressedDirac::free(10.0);
        assert!(matches!(
            d.sign_vector(&[0.0, 0.0, 10.5]),
            Err(BdfError::CutoffViolation { .. })
        ));
    }

    #[test]
    fn derivative_of_sign_vector_matches_finite_difference() {
        let d = dress(&PhysicalParams::new(0.05, 100.0), 1e-12, 50).unwrap();
        let u = [0.3, -0.7, 1.1];
        let e = [0.0, 0.6, 0.8];
        let h = 1e-5;
        let up = [u[0] + h * e[0], u[1] + h * e[1], u[2] + h * e[2]];
        let um = [u[0] - h * e[0], u[1] - h * e[1], u[2] - h * e[2]];
        let sp = d.sign_vector(&up).unwrap();
        let sm = d.sign_vector(&um).unwrap();
        let ds = d.sign_vector_derivative(&u, &e);
        for k in 0..4 {
            assert_relative_eq!(ds[k], (sp[k] - sm[k]) / (2.0 * h), epsilon = 1e-7);
        }
    }
}
