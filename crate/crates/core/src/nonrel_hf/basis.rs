//! Normalized s-type Gaussians on arbitrary centres and their Coulomb integrals.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BdfError, Result};

/// Even-tempered exponents α_k = α₀ β^k, k < n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub alpha0: f64,
    pub beta: f64,
    pub n: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec { alpha0: 0.02, beta: 2.2, n: 14 }
    }
}

impl BasisSpec {
    /// Reaches down to exponent 1e−5, wide enough for screened (Pekar-type) states at a ≥ 0.05.
    pub fn wide() -> Self {
        BasisSpec { alpha0: 1e-5, beta: 2.2, n: 26 }
    }

    pub fn exponents(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.alpha0 * self.beta.powi(k as i32)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.beta > 1.0 && self.n >= 1) {
            return Err(BdfError::InvalidInput(format!("basis needs α₀ > 0, β > 1, n ≥ 1, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Basis {
    pub exps: Vec<f64>,
    pub centers: Vec<[f64; 3]>,
}

impl Basis {
    pub fn atomic(spec: &BasisSpec) -> Basis {
        let exps = spec.exponents();
        let centers = vec![[0.0; 3]; exps.len()];
        Basis { exps, centers }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn shifted(&self, d: [f64; 3]) -> Basis {
        let centers = self.centers.iter().map(|c| [c[0] + d[0], c[1] + d[1], c[2] + d[2]]).collect();
        Basis { exps: self.exps.clone(), centers }
    }

    /// Every exponent multiplied by λ² and centre divided by λ: ψ ↦ λ^{3/2}ψ(λx).
    pub fn dilated(&self, lambda: f64) -> Basis {
        let exps = self.exps.iter().map(|a| a * lambda * lambda).collect();
        let centers = self.centers.iter().map(|c| [c[0] / lambda, c[1] / lambda, c[2] / lambda]).collect();
        Basis { exps, centers }
    }

    pub fn concat(&self, other: &Basis) -> Basis {
        let mut b = self.clone();
        b.exps.extend(&other.exps);
        b.centers.extend(&other.centers);
        b
    }

    /// Value of Σ c_k g_k at x.
    pub fn eval(&self, coeffs: &[f64], x: [f64; 3]) -> f64 {
        self.exps
            .iter()
            .zip(&self.centers)
            .zip(coeffs)
            .map(|((&a, c), w)| {
                let r2 = dist2(&x, c);
                w * norm(a) * (-a * r2).exp()
            })
            .sum()
    }
}

fn norm(a: f64) -> f64 {
    (2.0 * a / PI).powf(0.75)
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// F₀(t) = ∫₀¹ e^{−t s²} ds.
pub fn boys0(t: f64) -> f64 {
    if t < 1e-8 {
        1.0 - t / 3.0 + t * t / 10.0
    } else {
        0.5 * (PI / t).sqrt() * libm::erf(t.sqrt())
    }
}

/// Gaussian product of two primitives: exponent p, centre P, prefactor including normalization.
#[derive(Clone, Copy)]
struct Pair {
    p: f64,
    center: [f64; 3],
    k: f64,
}

fn pair(b: &Basis, i: usize, j: usize) -> Pair {
    let (a, c) = (b.exps[i], b.exps[j]);
    let (ra, rc) = (&b.centers[i], &b.centers[j]);
    let p = a + c;
    let center = [0, 1, 2].map(|d| (a * ra[d] + c * rc[d]) / p);
    let k = norm(a) * norm(c) * (-a * c / p * dist2(ra, rc)).exp();
    Pair { p, center, k }
}

/// One-electron matrices and the full (ij|kl) tensor.
#[derive(Debug, Clone)]
pub struct Integrals {
    pub n: usize,
    pub overlap: DMatrix<f64>,
    pub kinetic: DMatrix<f64>,
    /// ⟨g_i | 1/|x| | g_j⟩ for a unit charge at the origin.
    pub nuclear: DMatrix<f64>,
    eri: Vec<f64>,
}

impl Integrals {
    pub fn new(basis: &Basis) -> Integrals {
        let n = basis.len();
        let pairs: Vec<Pair> = (0..n * n).map(|ij| pair(basis, ij / n, ij % n)).collect();
        let mut overlap = DMatrix::zeros(n, n);
        let mut kinetic = DMatrix::zeros(n, n);
        let mut nuclear = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let pr = pairs[i * n + j];
                let s = pr.k * (PI / pr.p).powf(1.5);
                let mu = basis.exps[i] * basis.exps[j] / pr.p;
                let r2 = dist2(&basis.centers[i], &basis.centers[j]);
                overlap[(i, j)] = s;
                kinetic[(i, j)] = 0.5 * mu * (6.0 - 4.0 * mu * r2) * s;
                nuclear[(i, j)] = pr.k * 2.0 * PI / pr.p * boys0(pr.p * dist2(&pr.center, &[0.0; 3]));
            }
        }
        let eri: Vec<f64> = (0..n * n)
            .into_par_iter()
            .flat_map_iter(|ij| {
                let a = pairs[ij];
                pairs.iter().map(move |b| {
                    let s = a.p + b.p;
                    2.0 * PI.powf(2.5) / (a.p * b.p * s.sqrt()) * a.k * b.k * boys0(a.p * b.p / s * dist2(&a.center, &b.center))
                })
            })
            .collect();
        Integrals { n, overlap, kinetic, nuclear, eri }
    }

    /// (ij|kl) = ∫∫ g_i g_j (x) g_k g_l (y) / |x − y|.
    pub fn eri(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.eri[(i * n + j) * n * n + k * n + l]
    }

    /// J[P]_ij = Σ_kl (ij|kl) P_kl.
    pub fn coulomb(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let nn = n * n;
        let pv: Vec<f64> = (0..nn).map(|kl| p[(kl / n, kl % n)]).collect();
        DMatrix::from_fn(n, n, |i, j| {
            let row = &self.eri[(i * n + j) * nn..(i * n + j + 1) * nn];
            row.iter().zip(&pv).map(|(a, b)| a * b).sum()
        })
    }

    /// K[P]_ij = Σ_kl (ik|jl) P_kl.
    pub fn exchange(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += self.eri(i, k, j, l) * p[(k, l)];
                }
            }
            s
        })
    }

    /// 2-norm condition number of the overlap matrix.
    pub fn overlap_condition(&self) -> f64 {
        let ev = self.overlap.clone().symmetric_eigen().eigenvalues;
        let max = ev.iter().copied().fold(f64::MIN, f64::max);
        let min = ev.iter().copied().fold(f64::MAX, f64::min);
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_gaussian_closed_forms() {
        // Normalized e^{−ar²}: ⟨T⟩ = 3a/2, ⟨1/r⟩ = 2√(2a/π), self-repulsion 2√(a/π).
        let a = 0.7;
        let b = Basis { exps: vec![a], centers: vec![[0.0; 3]] };
        let ints = Integrals::new(&b);
        assert!((ints.overlap[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((ints.kinetic[(0, 0)] - 1.5 * a).abs() < 1e-14);
        assert!((ints.nuclear[(0, 0)] - 2.0 * (2.0 * a / PI).sqrt()).abs() < 1e-14);
        assert!((ints.eri(0, 0, 0, 0) - 2.0 * (a / PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn distant_charges_interact_like_points() {
        let b = Basis { exps: vec![1.0, 1.3], centers: vec![[0.0; 3], [0.0, 0.0, 40.0]] };
        let ints = Integrals::new(&b);
        assert!((ints.eri(0, 0, 1, 1) - 1.0 / 40.0).abs() < 1e-12);
        assert!((ints.nuclear[(1, 1)] - 1.0 / 40.0).abs() < 1e-12);
        assert!(ints.overlap[(0, 1)].abs() < 1e-100);
    }

    #[test]
    fn eri_symmetries() {
        let b = Basis { exps: vec![0.3, 1.1, 2.0], centers: vec![[0.0; 3], [0.5, 0.0, 0.0], [0.0, -0.3, 0.8]] };
        let ints = Integrals::new(&b);
        let v = ints.eri(0, 1, 2, 1);
        for w in [ints.eri(1, 0, 2, 1), ints.eri(2, 1, 0, 1), ints.eri(1, 2, 1, 0)] {
            assert!((v - w).abs() < 1e-14);
        }
    }

    #[test]
    fn same_centre_kinetic() {
        // Same centre: ⟨g_a|−Δ/2|g_b⟩ = 3ab/(a+b)·S_ab.
        let b = Basis::atomic(&BasisSpec { alpha0: 0.4, beta: 3.0, n: 3 });
        let ints = Integrals::new(&b);
        for i in 0..3 {
            for j in 0..3 {
                let (x, y) = (b.exps[i], b.exps[j]);
                let want = 3.0 * x * y / (x + y) * ints.overlap[(i, j)];
                assert!((ints.kinetic[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn boys_small_and_large() {
        assert!((boys0(0.0) - 1.0).abs() < 1e-15);
        assert!((boys0(1e-9) - boys0(2e-8)).abs() < 1e-8);
        assert!((boys0(100.0) - 0.5 * (PI / 100.0).sqrt()).abs() < 1e-12);
    }
}
