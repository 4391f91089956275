//! Dense plane-wave representation on the momentum ball of a grid.
//!
//! Operators are 4N×4N matrices in the orthonormal basis e^{ip·x}/√V ⊗ ℂ⁴, row/column
//! 4i + a for ball momentum i and spinor index a. This is where the resolvent algebra of the
//! Cauchy expansion happens; pair-list kernels convert in and out.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::density::{check_grid, Density};
use super::grid::Grid;
use super::kernel::{OperatorKernel, Spinor};
use crate::clifford::{slash, Mat4};
use crate::dressed_dirac::DressedDirac;
use crate::error::{BdfError, Result};

pub type DenseOp = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub struct Lattice {
    pub grid: Grid,
    pub ints: Vec<[i32; 3]>,
    pub momenta: Vec<[f64; 3]>,
    /// Grid index of each ball momentum.
    pub grid_index: Vec<usize>,
    lookup: Vec<i32>,
    /// ℰ(p).
    pub energy: Vec<f64>,
    pub sign: Vec<Mat4>,
    pub dirac: Vec<Mat4>,
    /// Per-momentum unitary whose first two columns span Ran P⁰₊(p).
    basis: Vec<Mat4>,
    coulomb: Vec<f64>,
}

impl Lattice {
    pub fn new(grid: &Grid, dressed: &DressedDirac) -> Result<Lattice> {
        let grid_index: Vec<usize> = (0..grid.len()).filter(|&i| grid.in_ball(i)).collect();
        let mut lookup = vec![-1; grid.len()];
        for (k, &i) in grid_index.iter().enumerate() {
            lookup[i] = k as i32;
        }
        let ints: Vec<[i32; 3]> = grid_index.iter().map(|&i| grid.ints(i)).collect();
        let momenta: Vec<[f64; 3]> = grid_index.iter().map(|&i| grid.momentum(i)).collect();
        let mut energy = Vec::with_capacity(momenta.len());
        let mut sign = Vec::with_capacity(momenta.len());
        let mut dirac = Vec::with_capacity(momenta.len());
        let mut basis = Vec::with_capacity(momenta.len());
        for p in &momenta {
            let d = dressed.dirac_matrix(p)?.entries;
            let s = slash(&dressed.sign_vector(p)?).entries;
            energy.push(dressed.script_e(crate::dressed_dirac::norm3(p)));
            basis.push(spectral_basis(&s));
            sign.push(s);
            dirac.push(d);
        }
        Ok(Lattice { grid: grid.clone(), ints, momenta, grid_index, lookup, energy, sign, dirac, basis, coulomb: grid.coulomb_kernel() })
    }

    /// Number of ball momenta N; operators have dimension 4N.
    pub fn size(&self) -> usize {
        self.ints.len()
    }

    pub fn dim(&self) -> usize {
        4 * self.size()
    }

    pub fn index_of(&self, m: [i32; 3]) -> Option<usize> {
        let h = self.grid.n as i32 / 2;
        if m.iter().any(|x| x.abs() >= h) {
            return None;
        }
        let k = self.lookup[self.grid.join(m)];
        (k >= 0).then_some(k as usize)
    }

    fn kernel_at(&self, m: [i32; 3]) -> f64 {
        self.coulomb[self.grid.join(m)]
    }

    pub fn zeros(&self) -> DenseOp {
        DenseOp::zeros(self.dim(), self.dim())
    }

    /// Signed spectral values ±ℰ(p), in the order of the spectral basis.
    pub fn spectrum(&self) -> Vec<f64> {
        self.energy.iter().flat_map(|&e| [e, e, -e, -e]).collect()
    }

    /// Plane-wave matrix of the multiplication operator v_ρ: block (p, q) = W(p−q) ρ̂(p−q)/V.
    pub fn potential(&self, rho_hat: &[Complex64]) -> DenseOp {
        let n = self.size();
        let v = 1.0 / self.grid.volume();
        let mut out = self.zeros();
        for j in 0..n {
            for i in 0..n {
                let d = sub(self.ints[i], self.ints[j]);
                let g = self.grid.join(d);
                let val = self.coulomb[g] * rho_hat[g] * v;
                for a in 0..4 {
                    out[(4 * i + a, 4 * j + a)] = val;
                }
            }
        }
        out
    }

    /// R_Q with R_{p′q′} = V⁻¹ Σ_a W(p′−a) Q_{a, a+q′−p′}.
    pub fn exchange(&self, q: &DenseOp) -> DenseOp {
        let n = self.size();
        let dim = self.dim();
        let v = 1.0 / self.grid.volume();
        let w: Vec<f64> = (0..n * n).map(|k| self.kernel_at(sub(self.ints[k / n], self.ints[k % n]))).collect();
        let mut out = self.zeros();
        let qs = q.as_slice();
        out.as_mut_slice().par_chunks_mut(4 * dim).enumerate().for_each(|(qp, cols)| {
            for pp in 0..n {
                let d = sub(self.ints[qp], self.ints[pp]);
                let mut acc = [ZERO; 16];
                for a in 0..n {
                    let Some(b) = self.index_of(add(self.ints[a], d)) else { continue };
                    let wk = w[pp * n + a];
                    for c in 0..4 {
                        let col = &qs[(4 * b + c) * dim + 4 * a..(4 * b + c) * dim + 4 * a + 4];
                        for r in 0..4 {
                            acc[4 * c + r] += wk * col[r];
                        }
                    }
                }
                for c in 0..4 {
                    for r in 0..4 {
                        cols[c * dim + 4 * pp + r] = acc[4 * c + r] * v;
                    }
                }
            }
        });
        out
    }

    /// ρ̂_Q(k) = Σ_{p−q=k} Tr Q_{pq}, on the full grid.
    pub fn density_hat(&self, q: &DenseOp) -> Vec<Complex64> {
        let n = self.size();
        let mut out = vec![ZERO; self.grid.len()];
        for j in 0..n {
            for i in 0..n {
                let t: Complex64 = (0..4).map(|a| q[(4 * i + a, 4 * j + a)]).sum();
                out[self.grid.join(sub(self.ints[i], self.ints[j]))] += t;
            }
        }
        out
    }

    pub fn density(&self, q: &DenseOp) -> Density {
        Density::from_fourier(&self.grid, self.density_hat(q))
    }

    fn block_map(&self, m: &DenseOp, left: impl Fn(usize) -> Mat4 + Sync, right: impl Fn(usize) -> Mat4 + Sync) -> DenseOp {
        let n = self.size();
        let dim = self.dim();
        let mut out = self.zeros();
        out.as_mut_slice().par_chunks_mut(4 * dim).enumerate().for_each(|(j, cols)| {
            let r = right(j);
            for i in 0..n {
                let b = m.fixed_view::<4, 4>(4 * i, 4 * j);
                let x = left(i) * b * r;
                for c in 0..4 {
                    for a in 0..4 {
                        cols[c * dim + 4 * i + a] = x[(a, c)];
                    }
                }
            }
        });
        out
    }

    /// U†MU: the matrix in the per-momentum spectral basis of 𝒟⁰.
    pub fn to_spectral(&self, m: &DenseOp) -> DenseOp {
        self.block_map(m, |i| self.basis[i].adjoint(), |j| self.basis[j])
    }

    pub fn from_spectral(&self, m: &DenseOp) -> DenseOp {
        self.block_map(m, |i| self.basis[i], |j| self.basis[j].adjoint())
    }

    /// Tr₀(𝒟⁰Q) = Σ_p Tr(𝒟⁰(p) Q_pp): the diagonal-momentum blocks carry all of it.
    pub fn kinetic_trace(&self, q: &DenseOp) -> f64 {
        (0..self.size()).map(|i| (self.dirac[i] * q.fixed_view::<4, 4>(4 * i, 4 * i)).trace().re).sum()
    }

    /// Tr(P₊QP₊ + P₋QP₋), computed on the spectral diagonal blocks.
    pub fn trace0(&self, q: &DenseOp) -> f64 {
        (0..self.size())
            .map(|i| {
                let b = self.basis[i].adjoint() * q.fixed_view::<4, 4>(4 * i, 4 * i) * self.basis[i];
                b.trace().re
            })
            .sum()
    }

    /// Hilbert–Schmidt norms of the (++, −−, +−/−+) spectral blocks.
    pub fn block_norms(&self, q: &DenseOp) -> BlockNorms {
        let s = self.to_spectral(q);
        let mut nn = [0.0; 3];
        for j in 0..s.ncols() {
            for i in 0..s.nrows() {
                let pi = i % 4 < 2;
                let pj = j % 4 < 2;
                let k = match (pi, pj) {
                    (true, true) => 0,
                    (false, false) => 1,
                    _ => 2,
                };
                nn[k] += s[(i, j)].norm_sqr();
            }
        }
        BlockNorms { plus_plus: nn[0].sqrt(), minus_minus: nn[1].sqrt(), off_diagonal: nn[2].sqrt() }
    }

    /// Ex = Tr(R_Q* Q).
    pub fn exchange_energy(&self, q: &DenseOp) -> f64 {
        let r = self.exchange(q);
        r.iter().zip(q.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Project a pair-list kernel onto the ball plane waves.
    pub fn from_kernel(&self, k: &OperatorKernel) -> Result<DenseOp> {
        check_grid(&self.grid, &k.grid)?;
        let mut out = self.zeros();
        for p in &k.pairs {
            let f = self.coefficient_vector(&p.left);
            let g = self.coefficient_vector(&p.right);
            out.gerc(Complex64::new(p.weight, 0.0), &f, &g, Complex64::new(1.0, 0.0));
        }
        Ok(out)
    }

    pub fn coefficient_vector(&self, s: &Spinor) -> nalgebra::DVector<Complex64> {
        let c = s.coefficients(&self.grid);
        nalgebra::DVector::from_fn(self.dim(), |r, _| c[r % 4][self.grid_index[r / 4]])
    }

    pub fn spinor_from_vector(&self, v: &[Complex64]) -> Spinor {
        let mut c: [Vec<Complex64>; 4] = std::array::from_fn(|_| vec![ZERO; self.grid.len()]);
        for (r, x) in v.iter().enumerate() {
            c[r % 4][self.grid_index[r / 4]] = *x;
        }
        Spinor::from_coefficients(&self.grid, &c)
    }

    /// Hermitian dense operator to a pair list by eigen-decomposition: eigenvalues below
    /// `rel_cut`·max are dropped, at most `cap` are kept, and the discarded relative
    /// Hilbert–Schmidt weight is reported. Exceeding `max_discarded` is an error.
    pub fn to_kernel(&self, q: &DenseOp, opts: &Compression) -> Result<(OperatorKernel, CompressionReport)> {
        let herm = (q - q.adjoint()).norm();
        let total = q.norm();
        if herm > 1e-10 * total.max(1e-300) {
            return Err(BdfError::NonHermitian(herm / total));
        }
        let eig = q.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let keep: Vec<usize> =
            order.iter().copied().filter(|&i| eig.eigenvalues[i].abs() > opts.rel_cut * top).take(opts.cap).collect();
        let kept_sq: f64 = keep.iter().map(|&i| eig.eigenvalues[i].powi(2)).sum();
        let total_sq: f64 = eig.eigenvalues.iter().map(|x| x * x).sum();
        let discarded = if total_sq > 0.0 { ((total_sq - kept_sq).max(0.0) / total_sq).sqrt() } else { 0.0 };
        let report = CompressionReport { rank: keep.len(), discarded, cap: opts.cap.min(q.nrows()) };
        if discarded > opts.max_discarded {
            return Err(BdfError::CompressionLoss { discarded, tol: opts.max_discarded, cap: opts.cap });
        }
        let orbitals: Vec<Spinor> =
            keep.iter().map(|&i| self.spinor_from_vector(eig.eigenvectors.column(i).as_slice())).collect();
        let weights: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i]).collect();
        Ok((OperatorKernel::from_orbitals(&self.grid, &orbitals, &weights), report))
    }
}

/// Orthonormal basis with Ran(1+s)/2 first: Gram–Schmidt over the columns of both projectors.
fn spectral_basis(s: &Mat4) -> Mat4 {
    let id = Mat4::identity();
    let half = Complex64::new(0.5, 0.0);
    let projectors = [(id + s) * half, (id - s) * half];
    let mut out = Mat4::zeros();
    let mut filled = 0;
    for p in projectors.iter() {
        let mut got = 0;
        for c in 0..4 {
            if got == 2 {
                break;
            }
            let mut v = p.column(c).into_owned();
            for k in 0..filled {
                let u = out.column(k).into_owned();
                let proj = u.dotc(&v);
                v -= u * proj;
            }
            let nv = v.norm();
            if nv > 0.3 {
                out.set_column(filled, &(v / Complex64::new(nv, 0.0)));
                filled += 1;
                got += 1;
            }
        }
        assert_eq!(got, 2, "sign matrix without a rank-two projector");
    }
    out
}

fn sub(a: [i32; 3], b: [i32; 3]) -> [i32; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: [i32; 3], b: [i32; 3]) -> [i32; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockNorms {
    pub plus_plus: f64,
    pub minus_minus: f64,
    pub off_diagonal: f64,
}

impl BlockNorms {
    pub fn total(&self) -> f64 {
        (self.plus_plus.powi(2) + self.minus_minus.powi(2) + self.off_diagonal.powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Compression {
    pub rel_cut: f64,
    pub cap: usize,
    pub max_discarded: f64,
}

impl Default for Compression {
    fn default() -> Self {
        Compression { rel_cut: 1e-10, cap: 64, max_discarded: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompressionReport {
    pub rank: usize,
    /// Discarded Hilbert–Schmidt weight relative to the full norm.
    pub discarded: f64,
    pub cap: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice() -> Lattice {
        let g = Grid::new(8, 6.0, 1e3).unwrap();
        Lattice::new(&g, &DressedDirac::free(1e3)).unwrap()
    }

    #[test]
    fn spectral_basis_diagonalizes_sign() {
        let lat = lattice();
        for i in 0..lat.size() {
            let u = lat.basis[i];
            let d = u.adjoint() * lat.sign[i] * u;
            let expect = Mat4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, -1.0, -1.0).map(|x| Complex64::new(x, 0.0)));
            assert!((d - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn exchange_is_self_adjoint_on_hs() {
        let lat = lattice();
        let d = lat.dim();
        let a = DenseOp::from_fn(d, d, |i, j| Complex64::new(((i * 7 + j * 3) % 11) as f64 - 5.0, ((i + 2 * j) % 5) as f64));
        let b = DenseOp::from_fn(d, d, |i, j| Complex64::new(((i * 5 + j) % 7) as f64, ((3 * i + j) % 4) as f64 - 1.0));
        let lhs: Complex64 = lat.exchange(&a).iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
        let rhs: Complex64 = a.iter().zip(lat.exchange(&b).iter()).map(|(x, y)| x.conj() * y).sum();
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm());
    }

    #[test]
    fn spectral_round_trip() {
        let lat = lattice();
        let d = lat.dim();
        let a = DenseOp::from_fn(d, d, |i, j| Complex64::new((i as f64 * 0.3).sin(), (j as f64 * 0.7).cos()));
        let back = lat.from_spectral(&lat.to_spectral(&a));
        assert!((back - a).norm() < 1e-10);
    }
}
