//! Rank-limited operator kernels Q = Σ w_i |f_i⟩⟨g_i| on the grid, their densities, the
//! exchange operator R_Q and the BDF energy.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use super::density::{check_grid, coulomb_bilinear, coulomb_pairing, Density};
use super::grid::Grid;
use crate::clifford::slash;
use crate::dressed_dirac::{DressedDirac, PhysicalParams};
use crate::error::{BdfError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A ℂ⁴-valued field sampled on the grid, one vector per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Spinor {
    pub comps: [Vec<Complex64>; 4],
}

impl Spinor {
    pub fn zeros(len: usize) -> Spinor {
        Spinor { comps: std::array::from_fn(|_| vec![ZERO; len]) }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [Complex64; 4]) -> Spinor {
        let mut s = Spinor::zeros(grid.len());
        for i in 0..grid.len() {
            let v = f(grid.position(i));
            for a in 0..4 {
                s.comps[a][i] = v[a];
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// ∫ self† other.
    pub fn inner(&self, other: &Spinor, grid: &Grid) -> Complex64 {
        let mut s = ZERO;
        for a in 0..4 {
            for (x, y) in self.comps[a].iter().zip(&other.comps[a]) {
                s += x.conj() * y;
            }
        }
        s * grid.dv()
    }

    pub fn norm(&self, grid: &Grid) -> f64 {
        self.inner(self, grid).re.sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Spinor {
        Spinor { comps: std::array::from_fn(|a| self.comps[a].iter().map(|x| x * c).collect()) }
    }

    pub fn axpy(&mut self, c: Complex64, other: &Spinor) {
        for a in 0..4 {
            for (x, y) in self.comps[a].iter_mut().zip(&other.comps[a]) {
                *x += c * y;
            }
        }
    }

    /// Plane-wave coefficients c_p = V^{−1/2} ∫ ψ e^{−ip·x}, so that Σ|c_p|² = ∫|ψ|².
    pub fn coefficients(&self, grid: &Grid) -> [Vec<Complex64>; 4] {
        let s = 1.0 / grid.volume().sqrt();
        std::array::from_fn(|a| {
            let mut f = grid.to_fourier(&self.comps[a]);
            f.iter_mut().for_each(|c| *c *= s);
            f
        })
    }

    pub fn from_coefficients(grid: &Grid, c: &[Vec<Complex64>; 4]) -> Spinor {
        let s = grid.volume().sqrt();
        Spinor {
            comps: std::array::from_fn(|a| {
                let mut f = grid.from_fourier(&c[a]);
                f.iter_mut().for_each(|x| *x *= s);
                f
            }),
        }
    }

    /// Zero every Fourier mode outside the open cutoff ball.
    pub fn band_limited(&self, grid: &Grid) -> Spinor {
        let mut c = self.coefficients(grid);
        mask(grid, &mut c);
        Spinor::from_coefficients(grid, &c)
    }

    /// Pointwise self(x)† other(x).
    pub fn pointwise_inner(&self, other: &Spinor) -> Vec<Complex64> {
        (0..self.len()).map(|i| (0..4).map(|a| self.comps[a][i].conj() * other.comps[a][i]).sum()).collect()
    }

    pub fn translated(&self, grid: &Grid, shift: [i32; 3]) -> Spinor {
        let mut out = Spinor::zeros(self.len());
        for i in 0..self.len() {
            let s = grid.split(i);
            let j = grid.join([s[0] as i32 + shift[0], s[1] as i32 + shift[1], s[2] as i32 + shift[2]]);
            for a in 0..4 {
                out.comps[a][j] = self.comps[a][i];
            }
        }
        out
    }
}

pub fn mask(grid: &Grid, c: &mut [Vec<Complex64>; 4]) {
    for i in 0..grid.len() {
        if !grid.in_ball(i) {
            for comp in c.iter_mut() {
                comp[i] = ZERO;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrbitalPair {
    pub left: Spinor,
    pub right: Spinor,
    pub weight: f64,
}

/// Q = Σ w_i |f_i⟩⟨g_i|. Immutable once built: every constructor band-limits the orbitals.
#[derive(Debug, Clone)]
pub struct OperatorKernel {
    pub grid: Grid,
    pub pairs: Vec<OrbitalPair>,
    pub hermitian: bool,
}

impl OperatorKernel {
    pub fn zero(grid: &Grid) -> OperatorKernel {
        OperatorKernel { grid: grid.clone(), pairs: Vec::new(), hermitian: true }
    }

    /// Σ w_i |ψ_i⟩⟨ψ_i|.
    pub fn from_orbitals(grid: &Grid, orbitals: &[Spinor], weights: &[f64]) -> OperatorKernel {
        assert_eq!(orbitals.len(), weights.len());
        let pairs = orbitals
            .par_iter()
            .zip(weights)
            .map(|(o, &w)| {
                let b = o.band_limited(grid);
                OrbitalPair { left: b.clone(), right: b, weight: w }
            })
            .collect();
        OperatorKernel { grid: grid.clone(), pairs, hermitian: true }
    }

    /// General pair list; Hermitian iff it is closed under (f, g, w) ↦ (g, f, w).
    pub fn from_pairs(grid: &Grid, pairs: Vec<(Spinor, Spinor, f64)>) -> OperatorKernel {
        let pairs: Vec<OrbitalPair> = pairs
            .into_par_iter()
            .map(|(f, g, w)| OrbitalPair { left: f.band_limited(grid), right: g.band_limited(grid), weight: w })
            .collect();
        let hermitian = pairs.iter().all(|p| {
            p.left == p.right
                || pairs.iter().any(|q| q.weight == p.weight && q.left == p.right && q.right == p.left)
        });
        OperatorKernel { grid: grid.clone(), pairs, hermitian }
    }

    pub fn rank(&self) -> usize {
        self.pairs.len()
    }

    /// Tr Q = Σ w_i ⟨g_i|f_i⟩.
    pub fn trace(&self) -> Complex64 {
        self.pairs.iter().map(|p| p.weight * p.right.inner(&p.left, &self.grid)).sum()
    }

    /// ‖Q‖₂² = Σ_ij w_i w_j ⟨g_i|g_j⟩⟨f_j|f_i⟩.
    pub fn hs_norm_sq(&self) -> f64 {
        let g = &self.grid;
        let mut s = ZERO;
        for pi in &self.pairs {
            for pj in &self.pairs {
                s += pi.weight * pj.weight * pi.right.inner(&pj.right, g) * pj.left.inner(&pi.left, g);
            }
        }
        s.re
    }

    pub fn translated(&self, shift: [i32; 3]) -> OperatorKernel {
        let g = &self.grid;
        let pairs = self
            .pairs
            .iter()
            .map(|p| OrbitalPair { left: p.left.translated(g, shift), right: p.right.translated(g, shift), weight: p.weight })
            .collect();
        OperatorKernel { grid: g.clone(), pairs, hermitian: self.hermitian }
    }

    /// Q h = Σ w_i f_i ⟨g_i|h⟩.
    pub fn apply(&self, h: &Spinor) -> Spinor {
        let mut out = Spinor::zeros(h.len());
        for p in &self.pairs {
            let c = p.weight * p.right.inner(h, &self.grid);
            out.axpy(c, &p.left);
        }
        out
    }

    /// Write the pair list: little-endian header (n, n, n as u64, extent, rank as u64), then
    /// per pair the weight and both fields with ℂ⁴ interleaved (re, im) doubles per point.
    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        let n = self.grid.n as u64;
        for v in [n, n, n] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.grid.extent.to_le_bytes())?;
        w.write_all(&(self.pairs.len() as u64).to_le_bytes())?;
        for p in &self.pairs {
            w.write_all(&p.weight.to_le_bytes())?;
            for s in [&p.left, &p.right] {
                for i in 0..s.len() {
                    for a in 0..4 {
                        w.write_all(&s.comps[a][i].re.to_le_bytes())?;
                        w.write_all(&s.comps[a][i].im.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Inverse of [`OperatorKernel::write_binary`]; the cutoff is not stored and must be given.
    pub fn read_binary(r: &mut impl Read, lambda: f64) -> Result<OperatorKernel> {
        let io = |e: std::io::Error| BdfError::InvalidInput(format!("orbital file: {e}"));
        let mut b8 = [0u8; 8];
        let mut u64_ = |r: &mut dyn Read| -> Result<u64> {
            r.read_exact(&mut b8).map_err(io)?;
            Ok(u64::from_le_bytes(b8))
        };
        let dims = [u64_(r)?, u64_(r)?, u64_(r)?];
        if dims[0] != dims[1] || dims[1] != dims[2] {
            return Err(BdfError::InvalidInput("orbital file: non-cubic grid".into()));
        }
        let mut f = [0u8; 8];
        r.read_exact(&mut f).map_err(io)?;
        let extent = f64::from_le_bytes(f);
        r.read_exact(&mut f).map_err(io)?;
        let rank = u64::from_le_bytes(f) as usize;
        let grid = Grid::new(dims[0] as usize, extent, lambda)?;
        let rd = |r: &mut dyn Read| -> Result<f64> {
            let mut f = [0u8; 8];
            r.read_exact(&mut f).map_err(io)?;
            Ok(f64::from_le_bytes(f))
        };
        let mut pairs = Vec::with_capacity(rank);
        for _ in 0..rank {
            let weight = rd(r)?;
            let mut fields = [Spinor::zeros(grid.len()), Spinor::zeros(grid.len())];
            for s in fields.iter_mut() {
                for i in 0..grid.len() {
                    for a in 0..4 {
                        let re = rd(r)?;
                        let im = rd(r)?;
                        s.comps[a][i] = Complex64::new(re, im);
                    }
                }
            }
            let [left, right] = fields;
            pairs.push(OrbitalPair { left, right, weight });
        }
        let hermitian = pairs.iter().all(|p| p.left == p.right);
        Ok(OperatorKernel { grid, pairs, hermitian })
    }
}

/// ρ_Q(x) = Σ_i w_i ⟨g_i(x), f_i(x)⟩_{ℂ⁴}; the real part is kept.
pub fn density_of(q: &OperatorKernel) -> Density {
    let g = &q.grid;
    let mut v = vec![0.0; g.len()];
    for p in &q.pairs {
        for (x, c) in v.iter_mut().zip(p.right.pointwise_inner(&p.left)) {
            *x += p.weight * c.re;
        }
    }
    Density::from_values(g, v)
}

/// Largest |Im ρ_Q(x)|, zero for Hermitian kernels up to rounding.
pub fn density_imaginary_part(q: &OperatorKernel) -> f64 {
    let mut v = vec![ZERO; q.grid.len()];
    for p in &q.pairs {
        for (x, c) in v.iter_mut().zip(p.right.pointwise_inner(&p.left)) {
            *x += p.weight * c;
        }
    }
    v.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
}

/// The exchange operator R_Q(x, y) = Q(x, y)/|x−y|, applied on the fly.
pub struct ExchangeOperator<'a> {
    q: &'a OperatorKernel,
    kernel: Vec<f64>,
}

pub fn exchange_kernel(q: &OperatorKernel) -> ExchangeOperator<'_> {
    ExchangeOperator { q, kernel: q.grid.coulomb_kernel() }
}

impl ExchangeOperator<'_> {
    fn convolve(&self, f: &[Complex64]) -> Vec<Complex64> {
        let g = &self.q.grid;
        let mut h = g.to_fourier(f);
        h.iter_mut().zip(&self.kernel).for_each(|(c, w)| *c *= w);
        g.from_fourier(&h)
    }

    /// (R_Q h)(x) = Σ_i w_i f_i(x) ((g_i† h) ∗ |·|⁻¹)(x), band-limited.
    pub fn apply(&self, h: &Spinor) -> Spinor {
        let g = &self.q.grid;
        let mut out = Spinor::zeros(h.len());
        for p in &self.q.pairs {
            let pot = self.convolve(&p.right.pointwise_inner(h));
            for a in 0..4 {
                for ((o, f), v) in out.comps[a].iter_mut().zip(&p.left.comps[a]).zip(&pot) {
                    *o += p.weight * f * v;
                }
            }
        }
        out.band_limited(g)
    }

    /// Ex[Q] = Tr(R_Q* Q) = ∬ |Q(x, y)|²/|x−y| = Σ_ij w_i w_j D(f_i†f_j, g_j†g_i).
    pub fn energy(&self) -> f64 {
        let g = &self.q.grid;
        let pairs = &self.q.pairs;
        let a_hat: Vec<Vec<Vec<Complex64>>> = pairs
            .iter()
            .map(|pi| pairs.iter().map(|pj| g.to_fourier(&pi.left.pointwise_inner(&pj.left))).collect())
            .collect();
        let mut s = ZERO;
        for (i, pi) in pairs.iter().enumerate() {
            for (j, pj) in pairs.iter().enumerate() {
                let b = g.to_fourier(&pj.right.pointwise_inner(&pi.right));
                s += pi.weight * pj.weight * coulomb_pairing(g, &self.kernel, &a_hat[i][j], &b);
            }
        }
        s.re
    }
}

/// Free-space ⟨a, |∇| b⟩ for fields localized well inside half the box: |∇| = −Δ(−Δ)^{−1/2}
/// with (−Δ)^{−1/2} the convolution by 1/(2π²|x|²), truncated like the Coulomb kernel.
pub fn abs_grad_form(grid: &Grid, hardy: &[f64], a: &[Vec<Complex64>; 4], b: &[Vec<Complex64>; 4]) -> Complex64 {
    let mut s = ZERO;
    for i in 0..grid.len() {
        let p = grid.momentum(i);
        let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let w = p2 * hardy[i] / (2.0 * PI * PI);
        for c in 0..4 {
            s += w * a[c][i].conj() * b[c][i];
        }
    }
    s
}

/// Tr(|∇|Q²) for a Hermitian orbital kernel, with the free-space |∇| of [`abs_grad_form`].
pub fn trace_abs_grad_q2(q: &OperatorKernel) -> f64 {
    let g = &q.grid;
    let hardy = g.hardy_kernel();
    let coeffs: Vec<_> = q.pairs.iter().map(|p| p.left.coefficients(g)).collect();
    let mut s = ZERO;
    for (i, pi) in q.pairs.iter().enumerate() {
        for (j, pj) in q.pairs.iter().enumerate() {
            // Q² = Σ w_i w_j |f_i⟩⟨f_i|f_j⟩⟨f_j|.
            let overlap = pi.right.inner(&pj.left, g);
            s += pi.weight * pj.weight * overlap * abs_grad_form(g, &hardy, &coeffs[j], &coeffs[i]);
        }
    }
    s.re
}

/// Tr₀(𝒟⁰Q) = Σ_i w_i Σ_p ĝ_i(p)† 𝒟⁰(p) f̂_i(p). For band-limited orbitals this is the sum of
/// the ++ and −− blocks: 𝒟⁰ commutes with P⁰± so the off-diagonal blocks carry no trace.
pub fn kinetic_trace(q: &OperatorKernel, dressed: &DressedDirac) -> Result<f64> {
    let g = &q.grid;
    let ball: Vec<(usize, crate::clifford::Mat4)> = (0..g.len())
        .filter(|&i| g.in_ball(i))
        .map(|i| {
            let p = g.momentum(i);
            dressed.dirac_matrix(&p).map(|d| (i, d.entries))
        })
        .collect::<Result<_>>()?;
    let mut s = ZERO;
    for pair in &q.pairs {
        let f = pair.left.coefficients(g);
        let h = pair.right.coefficients(g);
        for (i, d) in &ball {
            for a in 0..4 {
                for b in 0..4 {
                    s += pair.weight * h[a][*i].conj() * d[(a, b)] * f[b][*i];
                }
            }
        }
    }
    Ok(s.re)
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EnergyTerms {
    pub kinetic: f64,
    pub external: f64,
    pub direct: f64,
    pub exchange: f64,
    pub total: f64,
}

/// ℰ(Q) = Tr₀(𝒟⁰Q) − αD(ρ_Q, ν) + (α/2)(D(ρ_Q, ρ_Q) − Ex[Q]).
pub fn bdf_energy(q: &OperatorKernel, nu: &Density, params: &PhysicalParams, dressed: &DressedDirac) -> Result<EnergyTerms> {
    check_grid(&q.grid, &nu.grid)?;
    if !q.hermitian {
        return Err(BdfError::NonHermitian(f64::NAN));
    }
    let kinetic = kinetic_trace(q, dressed)?;
    let rho = density_of(q);
    let external = coulomb_bilinear(&rho, nu)?;
    let direct = coulomb_bilinear(&rho, &rho)?;
    let exchange = exchange_kernel(q).energy();
    let a = params.alpha;
    let total = kinetic - a * external + 0.5 * a * (direct - exchange);
    Ok(EnergyTerms { kinetic, external, direct, exchange, total })
}

/// Spinor ψ(x) = Σ_p c_p u_p e^{ip·x} with u_p the positive-energy projection of a fixed spinor;
/// used for Ran P⁰₊ test states.
pub fn project_positive(psi: &Spinor, grid: &Grid, dressed: &DressedDirac) -> Spinor {
    let mut c = psi.coefficients(grid);
    for i in 0..grid.len() {
        if !grid.in_ball(i) {
            for comp in c.iter_mut() {
                comp[i] = ZERO;
            }
            continue;
        }
        let sv = dressed.sign_vector_unchecked(&grid.momentum(i));
        let s = slash(&sv).entries;
        let v: [Complex64; 4] = std::array::from_fn(|a| c[a][i]);
        for a in 0..4 {
            let mut acc = 0.5 * v[a];
            for b in 0..4 {
                acc += 0.5 * s[(a, b)] * v[b];
            }
            c[a][i] = acc;
        }
    }
    Spinor::from_coefficients(grid, &c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &Grid, center: [f64; 3], width: f64, spin: [Complex64; 4]) -> Spinor {
        let s = Spinor::from_fn(grid, |x| {
            let r2 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum::<f64>();
            let e = (-r2 / (2.0 * width * width)).exp();
            std::array::from_fn(|a| spin[a] * e)
        })
        .band_limited(grid);
        let n = s.norm(grid);
        s.scaled(Complex64::new(1.0 / n, 0.0))
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rank_one_exchange_equals_direct() {
        let g = Grid::new(24, 12.0, 1e3).unwrap();
        let psi = gaussian(&g, [0.3, 0.0, -0.2], 1.0, [c(1.0, 0.0), c(0.0, 0.5), c(0.2, 0.0), c(0.0, 0.0)]);
        let q = OperatorKernel::from_orbitals(&g, &[psi], &[1.0]);
        let rho = density_of(&q);
        let d = coulomb_bilinear(&rho, &rho).unwrap();
        let ex = exchange_kernel(&q).energy();
        assert!((ex - d).abs() < 1e-10 * d, "{ex} vs {d}");
        assert!((rho.integral() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn density_trace_identity() {
        let g = Grid::new(16, 10.0, 1e3).unwrap();
        let f = gaussian(&g, [0.5, 0.0, 0.0], 0.9, [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let h = gaussian(&g, [0.0, -0.4, 0.0], 1.1, [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.3, 0.0)]);
        let q = OperatorKernel::from_pairs(&g, vec![(f.clone(), h.clone(), 0.7), (h, f, 0.7)]);
        assert!(q.hermitian);
        let rho = density_of(&q);
        assert!((rho.integral() - q.trace().re).abs() < 1e-10);
        assert!(density_imaginary_part(&q) < 1e-12);
    }

    #[test]
    fn exchange_operator_matches_energy() {
        // Tr(R_Q* Q) = Σ w_i ⟨f_i, R_Q f_i⟩ for Hermitian Q = Σ w |f⟩⟨f|.
        let g = Grid::new(16, 12.0, 1e3).unwrap();
        let f1 = gaussian(&g, [0.5, 0.0, 0.0], 0.9, [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let f2 = gaussian(&g, [-0.5, 0.3, 0.0], 1.0, [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let q = OperatorKernel::from_orbitals(&g, &[f1, f2], &[0.6, 0.3]);
        let x = exchange_kernel(&q);
        let direct: f64 = q.pairs.iter().map(|p| p.weight * p.left.inner(&x.apply(&p.left), &g).re).sum();
        let e = x.energy();
        assert!((direct - e).abs() < 1e-9 * e, "{direct} vs {e}");
    }

    #[test]
    fn binary_round_trip() {
        let g = Grid::new(8, 6.0, 1e3).unwrap();
        let f = gaussian(&g, [0.0; 3], 1.0, [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let q = OperatorKernel::from_orbitals(&g, &[f], &[1.0]);
        let mut buf = Vec::new();
        q.write_binary(&mut buf).unwrap();
        let back = OperatorKernel::read_binary(&mut buf.as_slice(), 1e3).unwrap();
        assert_eq!(back.pairs[0].left, q.pairs[0].left);
        assert_eq!(back.grid, g);
    }

    #[test]
    fn band_limiting_is_idempotent() {
        let g = Grid::new(16, 8.0, 3.0).unwrap();
        let f = gaussian(&g, [0.2, 0.1, 0.0], 0.4, [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let mut once = f.coefficients(&g);
        mask(&g, &mut once);
        let mut twice = once.clone();
        mask(&g, &mut twice);
        assert_eq!(once, twice);
    }
}
