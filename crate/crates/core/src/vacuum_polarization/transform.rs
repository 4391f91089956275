//! Radial inverse Fourier transform and L¹ norms of radial functions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::quadrature::GaussLegendre;

/// Sampled F̌(r) on a log-spaced r grid.
#[derive(Debug, Clone, Serialize)]
pub struct InverseTransform {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

impl InverseTransform {
    pub fn l1(&self) -> f64 {
        radial_l1(&self.r, &self.values)
    }
}

/// Unitary radial inverse transform F̌(r) = √(2/π) r⁻¹ ∫ k F(k) sin(kr) dk.
///
/// k·F(k) is taken piecewise linear between the given nodes and each panel is integrated
/// exactly against sin(kr) (Filon). For r·k_max small the closed form cancels badly and a
/// per-panel Gauss rule is used instead.
pub fn radial_inverse_fourier(k: &[f64], f: &[f64], r: &[f64]) -> InverseTransform {
    assert_eq!(k.len(), f.len());
    let g: Vec<f64> = k.iter().zip(f).map(|(k, f)| k * f).collect();
    let k_max = *k.last().unwrap_or(&0.0);
    let gl = GaussLegendre::new(4);
    let values = r
        .iter()
        .map(|&r| {
            let mut sum = 0.0;
            if r * k_max < 0.05 {
                for i in 0..k.len() - 1 {
                    let (k0, k1) = (k[i], k[i + 1]);
                    let s = (g[i + 1] - g[i]) / (k1 - k0);
                    sum += gl.integrate(k0, k1, |x| (g[i] + s * (x - k0)) * (r * x).sin());
                }
            } else {
                for i in 0..k.len() - 1 {
                    let (k0, k1) = (k[i], k[i + 1]);
                    let s = (g[i + 1] - g[i]) / (k1 - k0);
                    let (s0, c0) = (r * k0).sin_cos();
                    let (s1, c1) = (r * k1).sin_cos();
                    sum += -(g[i + 1] * c1 - g[i] * c0) / r + s * (s1 - s0) / (r * r);
                }
            }
            (2.0 / PI).sqrt() * sum / r
        })
        .collect();
    InverseTransform { r: r.to_vec(), values }
}

/// 4π ∫ r² |v(r)| dr on an increasing positive grid: trapezoid in ln r, with the ball
/// below the first node filled by a constant.
pub fn radial_l1(r: &[f64], v: &[f64]) -> f64 {
    let y: Vec<f64> = r.iter().zip(v).map(|(r, v)| r * r * r * v.abs()).collect();
    let mut s = 0.0;
    for i in 0..r.len() - 1 {
        s += 0.5 * (y[i] + y[i + 1]) * (r[i + 1] / r[i]).ln();
    }
    4.0 * PI * (s + r[0].powi(3) * v[0].abs() / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn gaussian_is_its_own_transform() {
        // F(k) = e^{−k²/2} maps to e^{−r²/2} under the unitary convention.
        let k: Vec<f64> = (0..=8000).map(|i| 12.0 * i as f64 / 8000.0).collect();
        let f: Vec<f64> = k.iter().map(|k| (-0.5 * k * k).exp()).collect();
        let r = log_grid(1e-4, 6.0, 200);
        let t = radial_inverse_fourier(&k, &f, &r);
        for (r, v) in t.r.iter().zip(&t.values) {
            assert!((v - (-0.5 * r * r).exp()).abs() < 1e-6, "r = {r}: {v}");
        }
    }

    #[test]
    fn l1_of_gaussian() {
        let r = log_grid(1e-5, 12.0, 4000);
        let v: Vec<f64> = r.iter().map(|r| (-0.5 * r * r).exp()).collect();
        let exact = (2.0 * PI).powf(1.5);
        assert!((radial_l1(&r, &v) - exact).abs() < 1e-5 * exact);
    }
}
