//! Vacuum polarization: B_Λ, the order-J terms f_{Λ,J}, F_Λ = f_Λ/(1 + f_Λ) and Z₃.

mod b_lambda;
mod f_terms;
mod transform;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressed_dirac::DressedDirac;
use crate::error::{BdfError, Result};
use crate::quadrature::{CubicSpline, SplineEnd};

pub use b_lambda::{compute_b, compute_b_direction};
pub use f_terms::{
    compute_f_term, f1_at_zero, f_term_monte_carlo, f_term_product, FTermEstimate, FTermMethod, FTermOptions,
    ProductRule, MAX_ORDER, REDUCED_TOL_FLOOR,
};
pub use transform::{radial_inverse_fourier, radial_l1, InverseTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormOptions {
    /// Highest order J kept in f_Λ = αB_Λ + Σ α^J f_{Λ,J}.
    pub j_max: usize,
    /// Positive k nodes, geometric from `k_min` to 2Λ (k = 0 is always added).
    pub k_nodes: usize,
    pub k_min: f64,
    /// Every `stride`-th node also gets the order ≥ 1 terms; the rest are interpolated.
    pub stride: usize,
    pub tol: f64,
    pub f_opts: FTermOptions,
    /// Nodes of the dense k grid used by the inverse transform.
    pub dense_k: usize,
    /// Log-spaced r nodes for F̌.
    pub r_nodes: usize,
    pub r_max: f64,
}

impl Default for RenormOptions {
    fn default() -> Self {
        Self {
            j_max: 1,
            k_nodes: 48,
            k_min: 1e-2,
            stride: 4,
            tol: 1e-8,
            f_opts: FTermOptions::default(),
            dense_k: 20_000,
            r_nodes: 600,
            r_max: 40.0,
        }
    }
}

/// Sampled vacuum-response functions on a radial k grid.
#[derive(Debug, Clone, Serialize)]
pub struct RenormFunctions {
    pub alpha: f64,
    pub lambda: f64,
    /// L = α ln Λ.
    pub l: f64,
    pub kgrid: Vec<f64>,
    pub b: Vec<f64>,
    /// f_terms[0] = αB_Λ, f_terms[J] = f_{Λ,J} (already carrying one factor α).
    pub f_terms: Vec<Vec<f64>>,
    /// Error bars for f_terms, same layout.
    pub f_errors: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    #[serde(rename = "F")]
    pub big_f: Vec<f64>,
    /// Z₃ = 1/(1 + f_Λ(0)).
    pub z3: f64,
    /// 1/(1 + α f_Λ(0)), the other normalization of f_Λ found in the literature.
    pub z3_alt_convention: f64,
    /// ‖F̌_Λ‖₁ for the kernel with ρ̂ ↦ F_Λ ρ̂ under convolution, (2π)^{−3}∫F e^{ik·x}dk.
    pub check_f_l1: f64,
    /// Same norm for the unitary transform (2π)^{−3/2}∫F e^{ik·x}dk.
    pub f_l1_unitary: f64,
}

/// Geometric grid with 0 prepended, ending exactly at 2Λ.
pub fn k_grid(lambda: f64, nodes: usize, k_min: f64) -> Vec<f64> {
    let k_max = 2.0 * lambda;
    let mut k = vec![0.0];
    for i in 0..nodes {
        k.push(k_min * (k_max / k_min).powf(i as f64 / (nodes - 1) as f64));
    }
    *k.last_mut().expect("nodes >= 2") = k_max;
    k
}

pub fn assemble(dressed: &DressedDirac, opts: &RenormOptions) -> Result<RenormFunctions> {
    if opts.j_max > MAX_ORDER {
        return Err(BdfError::UnsupportedOrder(opts.j_max));
    }
    if opts.k_nodes < 4 || opts.stride == 0 || !(opts.k_min > 0.0 && opts.k_min < 2.0 * dressed.lambda) {
        return Err(BdfError::InvalidInput("k grid needs >= 4 nodes, stride >= 1, 0 < k_min < 2Λ".into()));
    }
    let alpha = dressed.alpha;
    let lambda = dressed.lambda;
    let kgrid = k_grid(lambda, opts.k_nodes, opts.k_min);
    let n = kgrid.len();
    let b = kgrid
        .par_iter()
        .map(|&k| compute_b(k, dressed, opts.tol))
        .collect::<Result<Vec<f64>>>()?;
    let mut f_terms = vec![b.iter().map(|b| alpha * b).collect::<Vec<_>>()];
    let mut f_errors = vec![vec![0.0; n]];

    // Coarse nodes for J ≥ 1; the last node is 2Λ where every term vanishes.
    let mut coarse: Vec<usize> = (0..n - 1).step_by(opts.stride).collect();
    coarse.push(n - 1);
    for j in 1..=opts.j_max {
        let mut vals = Vec::with_capacity(coarse.len());
        let mut errs = Vec::with_capacity(coarse.len());
        for &i in &coarse {
            if i == n - 1 || alpha == 0.0 {
                vals.push(0.0);
                errs.push(0.0);
                continue;
            }
            let est = compute_f_term(j, kgrid[i], dressed, &opts.f_opts)?;
            vals.push(est.value);
            errs.push(est.std_error);
        }
        f_terms.push(interpolate_coarse(&kgrid, &coarse, &vals));
        f_errors.push(interpolate_coarse(&kgrid, &coarse, &errs));
    }

    let f: Vec<f64> = (0..n)
        .map(|i| f_terms.iter().enumerate().map(|(j, t)| alpha.powi(j as i32) * t[i]).sum())
        .collect();
    let big_f: Vec<f64> = f.iter().map(|f| f / (1.0 + f)).collect();
    let z3 = 1.0 / (1.0 + f[0]);
    let z3_alt_convention = 1.0 / (1.0 + alpha * f[0]);

    let unitary = inverse_transform(&kgrid, &big_f, lambda, opts);
    let f_l1_unitary = unitary.l1();
    let check_f_l1 = f_l1_unitary * (2.0 * PI).powf(-1.5);
    Ok(RenormFunctions {
        alpha,
        lambda,
        l: alpha * lambda.ln(),
        kgrid,
        b,
        f_terms,
        f_errors,
        f,
        big_f,
        z3,
        z3_alt_convention,
        check_f_l1,
        f_l1_unitary,
    })
}

/// Spread values known on `coarse` indices over the full grid: cubic in ln k for k > 0,
/// and quadratic in k between 0 and the first positive coarse node.
fn interpolate_coarse(kgrid: &[f64], coarse: &[usize], vals: &[f64]) -> Vec<f64> {
    let pos: Vec<(f64, f64)> =
        coarse.iter().zip(vals).filter(|(&i, _)| kgrid[i] > 0.0).map(|(&i, &v)| (kgrid[i].ln(), v)).collect();
    let v0 = if kgrid[coarse[0]] == 0.0 { vals[0] } else { pos[0].1 };
    let (lx, ly): (Vec<f64>, Vec<f64>) = pos.iter().copied().unzip();
    let spline = (lx.len() >= 2).then(|| CubicSpline::new(&lx, &ly, SplineEnd::Natural, SplineEnd::Natural));
    let k_first = lx[0].exp();
    kgrid
        .iter()
        .map(|&k| {
            if k == 0.0 {
                v0
            } else if k < k_first {
                v0 + (ly[0] - v0) * (k / k_first).powi(2)
            } else {
                spline.as_ref().map_or(ly[0], |s| s.eval(k.ln()))
            }
        })
        .collect()
}

fn resample(kgrid: &[f64], values: &[f64], dense: &[f64]) -> Vec<f64> {
    let lx: Vec<f64> = kgrid[1..].iter().map(|k| k.ln()).collect();
    let spline = CubicSpline::new(&lx, &values[1..], SplineEnd::Natural, SplineEnd::Natural);
    let k1 = kgrid[1];
    dense
        .iter()
        .map(|&k| {
            if k < k1 {
                values[0] + (values[1] - values[0]) * (k / k1).powi(2)
            } else {
                spline.eval(k.ln().min(lx[lx.len() - 1]))
            }
        })
        .collect()
}

fn inverse_transform(kgrid: &[f64], big_f: &[f64], lambda: f64, opts: &RenormOptions) -> InverseTransform {
    let k_max = 2.0 * lambda;
    let k1 = kgrid[1];
    let n_low = 32;
    let mut dense: Vec<f64> = (0..n_low).map(|i| k1 * i as f64 / n_low as f64).collect();
    let n_geo = opts.dense_k.max(64);
    for i in 0..n_geo {
        dense.push(k1 * (k_max / k1).powf(i as f64 / (n_geo - 1) as f64));
    }
    *dense.last_mut().expect("non-empty") = k_max;
    let values = resample(kgrid, big_f, &dense);
    let r_min = 1e-3 / lambda;
    let r: Vec<f64> = (0..opts.r_nodes)
        .map(|i| r_min * (opts.r_max / r_min).powf(i as f64 / (opts.r_nodes - 1) as f64))
        .collect();
    radial_inverse_fourier(&dense, &values, &r)
}

impl RenormFunctions {
    pub fn f0(&self) -> f64 {
        self.f[0]
    }

    /// F_Λ at arbitrary k, by the same interpolation used for the inverse transform.
    pub fn big_f_at(&self, k: &[f64]) -> Vec<f64> {
        let k_max = 2.0 * self.lambda;
        let inside: Vec<f64> = k.iter().map(|k| k.min(k_max)).collect();
        let mut v = resample(&self.kgrid, &self.big_f, &inside);
        for (v, k) in v.iter_mut().zip(k) {
            if *k >= k_max {
                *v = 0.0;
            }
        }
        v
    }

    /// Largest |f/(1 + f) − Σ_{ℓ≥1} (−1)^{ℓ+1} f^ℓ| over nodes with f < 1/2, the series cut
    /// once its tail bound f^{n+1}/(1 − f) drops below 1e−10. None if no node qualifies.
    pub fn neumann_check(&self) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for (&f, &big) in self.f.iter().zip(&self.big_f) {
            if !(f.abs() < 0.5) {
                continue;
            }
            let mut sum = 0.0;
            let mut term = f;
            let mut sign = 1.0;
            loop {
                sum += sign * term;
                term *= f;
                sign = -sign;
                if term.abs() / (1.0 - f.abs()) < 1e-10 {
                    break;
                }
            }
            let d = (sum - big).abs();
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
        worst
    }

    /// |Δf_Λ(0)| from the order-1 term measured in units of α² ln Λ.
    pub fn order_one_constant(&self) -> Option<f64> {
        let t = self.f_terms.get(1)?;
        let scale = self.alpha * self.alpha * self.lambda.ln();
        (scale > 0.0).then(|| (self.alpha * t[0]).abs() / scale)
    }

    /// CSV with header `k,B,f,F`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,B,f,F\n");
        for i in 0..self.kgrid.len() {
            s.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e}\n", self.kgrid[i], self.b[i], self.f[i], self.big_f[i]));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_coarse_values() {
        let k = k_grid(10.0, 13, 0.01);
        let coarse = vec![0, 4, 8, 12, 13];
        let vals = [1.0, 0.9, 0.5, 0.1, 0.0];
        let full = interpolate_coarse(&k, &coarse, &vals);
        for (&i, &v) in coarse.iter().zip(&vals) {
            assert!((full[i] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_spans_zero_to_twice_cutoff() {
        let k = k_grid(50.0, 20, 1e-2);
        assert_eq!(k[0], 0.0);
        assert_eq!(*k.last().unwrap(), 100.0);
        assert!(k.windows(2).all(|w| w[1] > w[0]));
    }
}
