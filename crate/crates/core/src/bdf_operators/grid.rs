//! Periodic cubic grid, 3D FFT and the truncated Coulomb-type kernels.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{BdfError, Result};
use crate::quadrature::GaussLegendre;

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// n³ points on a periodic cube of side `extent`, with momentum cutoff `lambda`.
///
/// Fields are band-limited to the open ball |p| < Λ_eff = min(Λ, k_Nyquist/2), so that pair
/// products (densities) are free of aliasing.
#[derive(Clone)]
pub struct Grid {
    pub n: usize,
    pub extent: f64,
    pub lambda: f64,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("extent", &self.extent).field("lambda", &self.lambda).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.extent == other.extent && self.lambda == other.lambda
    }
}

impl Grid {
    pub fn new(n: usize, extent: f64, lambda: f64) -> Result<Grid> {
        if n < 4 || n % 2 != 0 || !(extent > 0.0) || !(lambda > 0.0) {
            return Err(BdfError::InvalidInput(format!(
                "grid needs even n >= 4 and positive extent and cutoff (n={n}, L={extent}, Λ={lambda})"
            )));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans { fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) };
        Ok(Grid { n, extent, lambda, plans: Arc::new(plans) })
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn volume(&self) -> f64 {
        self.extent.powi(3)
    }

    pub fn dv(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn k_unit(&self) -> f64 {
        2.0 * PI / self.extent
    }

    pub fn k_nyquist(&self) -> f64 {
        PI * self.n as f64 / self.extent
    }

    pub fn lambda_eff(&self) -> f64 {
        self.lambda.min(0.5 * self.k_nyquist())
    }

    /// Signed frequency of FFT index i.
    pub fn freq(&self, i: usize) -> i32 {
        let n = self.n as i32;
        let i = i as i32;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn split(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    pub fn join(&self, m: [i32; 3]) -> usize {
        let n = self.n as i32;
        let w = |x: i32| x.rem_euclid(n) as usize;
        (w(m[0]) * self.n + w(m[1])) * self.n + w(m[2])
    }

    pub fn ints(&self, idx: usize) -> [i32; 3] {
        let s = self.split(idx);
        [self.freq(s[0]), self.freq(s[1]), self.freq(s[2])]
    }

    pub fn momentum(&self, idx: usize) -> [f64; 3] {
        let m = self.ints(idx);
        let u = self.k_unit();
        [u * m[0] as f64, u * m[1] as f64, u * m[2] as f64]
    }

    /// Position of grid point idx, in [−L/2, L/2)³ with the origin at index 0.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let m = self.ints(idx);
        let h = self.spacing();
        [h * m[0] as f64, h * m[1] as f64, h * m[2] as f64]
    }

    pub fn in_ball(&self, idx: usize) -> bool {
        let p = self.momentum(idx);
        (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() < self.lambda_eff()
    }

    /// Index of −k.
    pub fn negate(&self, idx: usize) -> usize {
        let m = self.ints(idx);
        self.join([-m[0], -m[1], -m[2]])
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "field does not match grid");
        let plan = if inverse { &self.plans.inv } else { &self.plans.fwd };
        // Contiguous z lines in one call.
        plan.process(data);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for ix in 0..n {
            for iz in 0..n {
                for iy in 0..n {
                    line[iy] = data[(ix * n + iy) * n + iz];
                }
                plan.process(&mut line);
                for iy in 0..n {
                    data[(ix * n + iy) * n + iz] = line[iy];
                }
            }
        }
        for iy in 0..n {
            for iz in 0..n {
                for ix in 0..n {
                    line[ix] = data[(ix * n + iy) * n + iz];
                }
                plan.process(&mut line);
                for ix in 0..n {
                    data[(ix * n + iy) * n + iz] = line[ix];
                }
            }
        }
    }

    /// Unnormalized forward transform Σ_x f(x) e^{−ik·x}.
    pub fn fft_forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Unnormalized inverse transform Σ_k f̂(k) e^{ik·x}.
    pub fn fft_inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// ∫ f e^{−ik·x} dx on the torus.
    pub fn to_fourier(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut d = values.to_vec();
        self.fft_forward(&mut d);
        let dv = self.dv();
        d.iter_mut().for_each(|c| *c *= dv);
        d
    }

    /// Inverse of [`Grid::to_fourier`]: f(x) = V⁻¹ Σ_k f̂(k) e^{ik·x}.
    pub fn from_fourier(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut d = coeffs.to_vec();
        self.fft_inverse(&mut d);
        let s = 1.0 / self.volume();
        d.iter_mut().for_each(|c| *c *= s);
        d
    }

    /// Truncation radius of the Coulomb-type kernels, half the box.
    pub fn truncation_radius(&self) -> f64 {
        0.5 * self.extent
    }

    /// Fourier multiplier of 1/|x| cut at R = L/2: 4π(1 − cos kR)/k², 2πR² at k = 0.
    ///
    /// Exact for charge distributions whose pairwise distances stay below R; for a charged
    /// density it reproduces the spherically truncated potential, which removes the
    /// periodic-image ambiguity of the k = 0 mode.
    pub fn coulomb_kernel(&self) -> Vec<f64> {
        let r = self.truncation_radius();
        (0..self.len())
            .map(|i| {
                let p = self.momentum(i);
                let k2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                if k2 == 0.0 {
                    2.0 * PI * r * r
                } else {
                    4.0 * PI * (1.0 - (k2.sqrt() * r).cos()) / k2
                }
            })
            .collect()
    }

    /// Fourier multiplier of 1/|x|² cut at R = L/2: 4π Si(kR)/k, 4πR at k = 0.
    pub fn hardy_kernel(&self) -> Vec<f64> {
        let r = self.truncation_radius();
        let mut cache: HashMap<i64, f64> = HashMap::new();
        (0..self.len())
            .map(|i| {
                let m = self.ints(i);
                let key = (m[0] as i64).pow(2) + (m[1] as i64).pow(2) + (m[2] as i64).pow(2);
                *cache.entry(key).or_insert_with(|| {
                    if key == 0 {
                        4.0 * PI * r
                    } else {
                        let k = self.k_unit() * (key as f64).sqrt();
                        4.0 * PI * sine_integral(k * r) / k
                    }
                })
            })
            .collect()
    }
}

/// Si(x) = ∫₀ˣ sin t / t dt by Gauss–Legendre on panels of length ≤ π/2.
pub fn sine_integral(x: f64) -> f64 {
    thread_local! {
        static GL: GaussLegendre = GaussLegendre::new(12);
    }
    if x == 0.0 {
        return 0.0;
    }
    let sign = x.signum();
    let x = x.abs();
    let panels = (x / (0.5 * PI)).ceil().max(1.0) as usize;
    let h = x / panels as f64;
    let mut s = 0.0;
    GL.with(|gl| {
        for j in 0..panels {
            let a = j as f64 * h;
            s += gl.integrate(a, a + h, |t| if t == 0.0 { 1.0 } else { t.sin() / t });
        }
    });
    sign * s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_round_trip() {
        let g = Grid::new(8, 5.0, 10.0).unwrap();
        let v: Vec<Complex64> = (0..g.len()).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let back = g.from_fourier(&g.to_fourier(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_lands_on_its_index() {
        let g = Grid::new(8, 4.0, 10.0).unwrap();
        let target = g.join([1, -2, 3]);
        let k = g.momentum(target);
        let v: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let x = g.position(i);
                Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
            })
            .collect();
        let f = g.to_fourier(&v);
        assert!((f[target].re - g.volume()).abs() < 1e-9);
        assert!(f.iter().enumerate().all(|(i, c)| i == target || c.norm() < 1e-9));
    }

    #[test]
    fn sine_integral_values() {
        assert!((sine_integral(1.0) - 0.946_083_070_367_183).abs() < 1e-13);
        assert!((sine_integral(100.0) - 1.562_225_466_889_056).abs() < 1e-12);
    }

    #[test]
    fn ball_is_inside_half_nyquist() {
        let g = Grid::new(16, 10.0, 1e3).unwrap();
        assert!((g.lambda_eff() - 0.5 * g.k_nyquist()).abs() < 1e-15);
        let count = (0..g.len()).filter(|&i| g.in_ball(i)).count();
        assert!(count > 200 && count < 300, "{count}");
    }
}
