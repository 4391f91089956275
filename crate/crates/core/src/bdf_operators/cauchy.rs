//! Terms of the Cauchy expansion Q_j = −(1/2π)∫dη (𝒟⁰+iη)⁻¹ (B(𝒟⁰+iη)⁻¹)^j with
//! B = v[ρ] − R_Q, on the dense lattice.
//!
//! In the spectral basis of 𝒟⁰ the resolvent is diagonal, (λ_a + iη)⁻¹ with λ_a = ±ℰ, and for
//! j ≤ 2 the η-integral reduces to residues at the single pole of minority sign. j = 3 (and a
//! cross-check of every order) uses Gauss–Legendre in θ with η = tan θ.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::density::Density;
use super::kernel::OperatorKernel;
use super::lattice::{Compression, CompressionReport, DenseOp, Lattice};
use crate::clifford::Mat4;
use crate::dressed_dirac::DressedDirac;
use crate::error::{BdfError, Result};
use crate::quadrature::GaussLegendre;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Contour {
    /// Closed-form residues (j ≤ 2).
    Residue,
    /// η = tan θ with this many Gauss–Legendre nodes on (0, π/2).
    Quadrature(usize),
}

/// B = v[ρ] − R_Q as a plane-wave matrix; either part may be absent.
pub fn mean_field_operator(lat: &Lattice, rho_hat: Option<&[Complex64]>, q: Option<&DenseOp>) -> DenseOp {
    let mut b = match rho_hat {
        Some(r) => lat.potential(r),
        None => lat.zeros(),
    };
    if let Some(q) = q {
        b -= lat.exchange(q);
    }
    b
}

/// Q_j in the plane-wave basis for a mean-field operator B given in the plane-wave basis.
pub fn cauchy_dense(lat: &Lattice, j: usize, b: &DenseOp, contour: Contour) -> Result<DenseOp> {
    let bs = lat.to_spectral(b);
    let lam = lat.spectrum();
    let qs = match (j, contour) {
        (1, Contour::Residue) => residue_first(&bs, &lam),
        (2, Contour::Residue) => residue_second(&bs, &lam),
        (1..=3, Contour::Quadrature(n)) => quadrature(&bs, &lam, j, n),
        (3, Contour::Residue) => quadrature(&bs, &lam, 3, 64),
        _ => return Err(BdfError::UnsupportedOrder(j)),
    };
    Ok(lat.from_spectral(&qs))
}

fn positive(i: usize) -> bool {
    i % 4 < 2
}

/// Q₁_ab = −B_ab/(E_a + E_b) between opposite signs, zero otherwise.
fn residue_first(b: &DenseOp, lam: &[f64]) -> DenseOp {
    DenseOp::from_fn(b.nrows(), b.ncols(), |i, j| {
        if positive(i) != positive(j) {
            -b[(i, j)] / (lam[i].abs() + lam[j].abs())
        } else {
            ZERO
        }
    })
}

/// Q₂_ab = −Σ_c B_ac B_cb J(λ_a, λ_c, λ_b), where J is the residue at the pole of minority sign.
fn residue_second(b: &DenseOp, lam: &[f64]) -> DenseOp {
    let dim = b.nrows();
    let e: Vec<f64> = lam.iter().map(|x| x.abs()).collect();
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..dim).partition(|&i| positive(i));
    let block = |rows: &[usize], cols: &[usize], f: &dyn Fn(usize, usize) -> f64| {
        DenseOp::from_fn(rows.len(), cols.len(), |r, c| b[(rows[r], cols[c])] * f(rows[r], cols[c]))
    };
    let one = |_: usize, _: usize| 1.0;
    let inv = |a: usize, c: usize| 1.0 / (e[a] + e[c]);
    let bpp = block(&pos, &pos, &one);
    let bnn = block(&neg, &neg, &one);
    let bpn_w = block(&pos, &neg, &inv);
    let bnp_w = block(&neg, &pos, &inv);

    // +− block: patterns (+,−,−) with weight −1/((E_a+E_c)(E_a+E_b)) and (+,+,−) with
    // +1/((E_c+E_b)(E_a+E_b)).
    let pn = &bpp * &bpn_w - &bpn_w * &bnn;
    // −+ block: (−,+,+) with +1/((E_a+E_c)(E_a+E_b)) and (−,−,+) with −1/((E_c+E_b)(E_a+E_b)).
    let np = &bnp_w * &bpp - &bnn * &bnp_w;
    // ++ block: (+,−,+) with +1/((E_a+E_c)(E_c+E_b)); −− block: (−,+,−) with the opposite sign.
    let pp = &bpn_w * &bnp_w;
    let nn = -(&bnp_w * &bpn_w);

    let mut out = DenseOp::zeros(dim, dim);
    for (r, &a) in pos.iter().enumerate() {
        for (c, &bb) in neg.iter().enumerate() {
            out[(a, bb)] = pn[(r, c)] / (e[a] + e[bb]);
        }
        for (c, &bb) in pos.iter().enumerate() {
            out[(a, bb)] = pp[(r, c)];
        }
    }
    for (r, &a) in neg.iter().enumerate() {
        for (c, &bb) in pos.iter().enumerate() {
            out[(a, bb)] = np[(r, c)] / (e[a] + e[bb]);
        }
        for (c, &bb) in neg.iter().enumerate() {
            out[(a, bb)] = nn[(r, c)];
        }
    }
    out
}

/// −(1/2π)∫ R(−BR)^j dη with R = diag(1/(λ + iη)). M(−η) = M(η)†, so only η > 0 is sampled.
fn quadrature(b: &DenseOp, lam: &[f64], j: usize, nodes: usize) -> DenseOp {
    let gl = GaussLegendre::new(nodes);
    let dim = b.nrows();
    let mut acc = DenseOp::zeros(dim, dim);
    for (theta, w) in gl.on(0.0, 0.5 * PI) {
        let eta = theta.tan();
        let jac = 1.0 / theta.cos().powi(2);
        let r: Vec<Complex64> = lam.iter().map(|l| 1.0 / Complex64::new(*l, eta)).collect();
        // M = R B R … B R = diag(r) (B diag(r))^{j−1} B diag(r).
        let mut m = chain(b, &r, j);
        for c in 0..dim {
            for rr in 0..dim {
                m[(rr, c)] *= r[rr] * r[c];
            }
        }
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        let scale = Complex64::new(sign * w * jac / (2.0 * PI), 0.0);
        acc += (&m + m.adjoint()) * scale;
    }
    acc
}

/// (B diag(r))^{j−1} B.
fn chain(b: &DenseOp, r: &[Complex64], j: usize) -> DenseOp {
    let mut m = b.clone();
    for _ in 1..j {
        let mut scaled = m;
        for (c, rc) in r.iter().enumerate() {
            scaled.column_mut(c).iter_mut().for_each(|x| *x *= rc);
        }
        m = &scaled * b;
    }
    m
}

#[derive(Debug, Clone)]
pub struct CauchyOutput {
    pub kernel: OperatorKernel,
    pub compression: CompressionReport,
    pub dense: DenseOp,
}

/// Q_j(Q, ρ) as a compressed pair-list kernel on Q's grid.
pub fn cauchy_term(j: usize, q: &OperatorKernel, rho: &Density, dressed: &DressedDirac, nquad: usize) -> Result<CauchyOutput> {
    cauchy_term_with(j, q, rho, dressed, nquad, &Compression::default())
}

pub fn cauchy_term_with(
    j: usize,
    q: &OperatorKernel,
    rho: &Density,
    dressed: &DressedDirac,
    nquad: usize,
    compression: &Compression,
) -> Result<CauchyOutput> {
    if !(1..=3).contains(&j) {
        return Err(BdfError::UnsupportedOrder(j));
    }
    let lat = Lattice::new(&q.grid, dressed)?;
    let qd = lat.from_kernel(q)?;
    let b = mean_field_operator(&lat, Some(&rho.fourier), Some(&qd));
    let dense = cauchy_dense(&lat, j, &b, Contour::Quadrature(nquad))?;
    let (kernel, report) = lat.to_kernel(&dense, compression)?;
    Ok(CauchyOutput { kernel, compression: report, dense })
}

/// ½(R̂ − s_p R̂ s_q)/(ℰ(p) + ℰ(q)), the closed form of the Q-only first-order term.
pub fn q10_formula(lat: &Lattice, r: &DenseOp, i: usize, j: usize) -> Mat4 {
    let rb: Mat4 = r.fixed_view::<4, 4>(4 * i, 4 * j).into_owned();
    let x = rb - lat.sign[i] * rb * lat.sign[j];
    x * Complex64::new(0.5 / (lat.energy[i] + lat.energy[j]), 0.0)
}

/// (1/2π)∫ R_p(η) B_pq R_q(η) dη for one momentum block, with the 4×4 plane-wave resolvents
/// (𝒟⁰(p) + iη)⁻¹ = (𝒟⁰(p) − iη)/(ℰ² + η²) and B = −R̂.
pub fn q10_contour_block(lat: &Lattice, r: &DenseOp, i: usize, j: usize, nodes: usize) -> Mat4 {
    let b: Mat4 = -r.fixed_view::<4, 4>(4 * i, 4 * j).into_owned();
    let gl = GaussLegendre::new(nodes);
    let resolvent = |k: usize, eta: f64| {
        let e2 = lat.energy[k] * lat.energy[k];
        (lat.dirac[k] - Mat4::identity() * Complex64::new(0.0, eta)) * Complex64::new(1.0 / (e2 + eta * eta), 0.0)
    };
    let mut acc = Mat4::zeros();
    for (theta, w) in gl.on(-0.5 * PI, 0.5 * PI) {
        let eta = theta.tan();
        let jac = 1.0 / theta.cos().powi(2);
        acc += resolvent(i, eta) * b * resolvent(j, eta) * Complex64::new(w * jac, 0.0);
    }
    acc * Complex64::new(1.0 / (2.0 * PI), 0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Q10Check {
    pub pairs: usize,
    pub max_relative_error: f64,
    /// Agreement of the residue construction with the formula over the whole lattice.
    pub residue_relative_error: f64,
}

/// Compare the closed form with the contour integral on `samples` random momentum pairs.
pub fn q10_check(lat: &Lattice, q: &DenseOp, samples: usize, nodes: usize, seed: u64) -> Result<Q10Check> {
    let r = lat.exchange(q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lat.size();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let f = q10_formula(lat, &r, i, j);
        let c = q10_contour_block(lat, &r, i, j, nodes);
        let scale = f.norm().max(1e-300);
        worst = worst.max((f - c).norm() / scale);
    }
    let full = cauchy_dense(lat, 1, &(-&r), Contour::Residue)?;
    let mut diff = 0.0;
    let mut norm = 0.0;
    for i in 0..n {
        for j in 0..n {
            let f = q10_formula(lat, &r, i, j);
            let c: Mat4 = full.fixed_view::<4, 4>(4 * i, 4 * j).into_owned();
            diff += (f - c).norm_squared();
            norm += f.norm_squared();
        }
    }
    Ok(Q10Check { pairs: samples, max_relative_error: worst, residue_relative_error: (diff / norm.max(1e-300)).sqrt() })
}

/// The linear map F₁,₀: Q ↦ Q₁ with B = −R_Q.
pub fn f10_apply(lat: &Lattice, q: &DenseOp) -> DenseOp {
    let b = -lat.exchange(q);
    let bs = lat.to_spectral(&b);
    lat.from_spectral(&residue_first(&bs, &lat.spectrum()))
}

#[derive(Debug, Clone, Serialize)]
pub struct F10Norm {
    /// Power-iteration estimate of ‖F₁,₀‖ on 𝔖₂.
    pub operator_norm: f64,
    /// Largest ‖F₁,₀(Q)‖₂/‖Q‖₂ over random rank-3 Hermitian Q.
    pub random_rank3: f64,
    pub iterations: usize,
}

/// ‖F₁,₀‖_{𝔖₂→𝔖₂}: power iteration on F*F. Both the exchange map and the spectral
/// off-diagonal scaling are self-adjoint on 𝔖₂, so F* = R∘P.
pub fn f10_norm(lat: &Lattice, samples: usize, iterations: usize, seed: u64) -> F10Norm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lam = lat.spectrum();
    let p_map = |x: &DenseOp| lat.from_spectral(&residue_first(&lat.to_spectral(x), &lam));
    let mut random_rank3 = 0.0f64;
    let mut start = lat.zeros();
    for _ in 0..samples {
        let q = random_hermitian(lat, 3, &mut rng);
        let f = f10_apply(lat, &q);
        random_rank3 = random_rank3.max(f.norm() / q.norm());
        start += q;
    }
    let mut x = start.clone() / Complex64::new(start.norm(), 0.0);
    let mut est = 0.0;
    for _ in 0..iterations {
        let y = lat.exchange(&p_map(&p_map(&lat.exchange(&x))));
        // F = −p∘R, so F*F = R p p R.
        let ny = y.norm();
        est = ny.sqrt();
        x = y / Complex64::new(ny, 0.0);
    }
    F10Norm { operator_norm: est, random_rank3, iterations }
}

/// Random Hermitian rank-r operator with unit Hilbert–Schmidt norm.
pub fn random_hermitian(lat: &Lattice, rank: usize, rng: &mut impl Rng) -> DenseOp {
    let d = lat.dim();
    let mut q = lat.zeros();
    for _ in 0..rank {
        let v = nalgebra::DVector::from_fn(d, |_, _| Complex64::new(gauss(rng), gauss(rng)));
        let w = gauss(rng);
        q.gerc(Complex64::new(w, 0.0), &v, &v, Complex64::new(1.0, 0.0));
    }
    let n = q.norm();
    q / Complex64::new(n, 0.0)
}

fn gauss(rng: &mut impl Rng) -> f64 {
    // Box–Muller.
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}
