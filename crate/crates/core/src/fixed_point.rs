//! The Banach–Picard scheme for the self-consistent vacuum (γ, ρ″) around a fixed electron
//! projector N, the linear-response density and the charge-renormalization table.
//!
//! One step maps (γ, ρ″) to
//!   γ  ← Σ_{ℓ=1}^{order} α^ℓ Q_ℓ(B),  B = v[ρ″] − R[γ + N],
//!   ρ̂″ ← [n̂″ + α ρ̂_{1,0} + Σ_{ℓ≥2} α^ℓ ρ̂_ℓ] / (1 + α B_Λ(k)),
//! where ρ_{1,0} is the density of the first-order term with B = −R[γ + N] alone. The
//! linear response of the vacuum to ρ″ is the continuum B_Λ, so the prefactor sees the true
//! cutoff Λ; everything else lives on the lattice.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bdf_operators::cauchy::{cauchy_dense, mean_field_operator, Contour};
use crate::bdf_operators::{density_of, Compression, CompressionReport, Density, DenseOp, Grid, Lattice, OperatorKernel};
use crate::dressed_dirac::{dress, DressedDirac, PhysicalParams};
use crate::error::{BdfError, Result};
use crate::vacuum_polarization::{assemble, compute_b, radial_inverse_fourier, RenormFunctions, RenormOptions};

#[derive(Debug, Clone, Serialize)]
pub struct ScfOptions {
    pub n: usize,
    pub extent: f64,
    pub order: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Gauss–Legendre nodes for third-order terms.
    pub nquad: usize,
}

impl Default for ScfOptions {
    fn default() -> Self {
        ScfOptions { n: 12, extent: 8.0, order: 2, tol: 1e-10, max_iter: 60, nquad: 32 }
    }
}

/// Static data of a run: lattice, ν, the electron projector and B_Λ on the grid.
pub struct ScfProblem {
    pub params: PhysicalParams,
    pub lattice: Lattice,
    pub nu: Density,
    pub n_op: DenseOp,
    /// n″ = n − ν.
    pub n_pp: Density,
    b_lambda: Vec<f64>,
    pub order: usize,
    pub nquad: usize,
}

impl ScfProblem {
    pub fn new(params: &PhysicalParams, dressed: &DressedDirac, opts: &ScfOptions) -> Result<ScfProblem> {
        if !(1..=3).contains(&opts.order) {
            return Err(BdfError::UnsupportedOrder(opts.order));
        }
        let grid = Grid::new(opts.n, opts.extent, params.lambda)?;
        let lattice = Lattice::new(&grid, dressed)?;
        let nu = params.nu.on_grid(&grid, params.z);
        let n_op = electron_projector(&lattice, &nu, params.alpha, params.electrons)?;
        let n_density = lattice.density(&n_op);
        let n_pp = n_density.add(&nu, -1.0)?;
        let b_lambda = b_on_grid(&grid, dressed)?;
        Ok(ScfProblem { params: params.clone(), lattice, nu, n_op, n_pp, b_lambda, order: opts.order, nquad: opts.nquad })
    }

    pub fn initial_state(&self) -> ScfState {
        ScfState {
            gamma: self.lattice.zeros(),
            rho_pp: self.n_pp.clone(),
            residual_history: Vec::new(),
            ratio_history: Vec::new(),
            furry_history: Vec::new(),
        }
    }

    pub fn n_kernel(&self) -> Result<(OperatorKernel, CompressionReport)> {
        self.lattice.to_kernel(&self.n_op, &Compression { max_discarded: 1e-12, ..Compression::default() })
    }

    pub fn electron_rank(&self) -> usize {
        let eig = self.n_op.clone().symmetric_eigen();
        eig.eigenvalues.iter().filter(|x| x.abs() > 0.5).count()
    }
}

/// Lowest `m` positive eigenvectors of 𝒟⁰ − α v_ν on the lattice, as a projector.
fn electron_projector(lat: &Lattice, nu: &Density, alpha: f64, m: usize) -> Result<DenseOp> {
    let mut op = lat.potential(&nu.fourier) * Complex64::new(-alpha, 0.0);
    for i in 0..lat.size() {
        let mut b = op.fixed_view_mut::<4, 4>(4 * i, 4 * i);
        b += lat.dirac[i];
    }
    let eig = op.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > 0.0).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if idx.len() < m {
        return Err(BdfError::InvalidInput(format!("only {} positive states on the lattice, M = {m}", idx.len())));
    }
    let mut n = lat.zeros();
    for &i in idx.iter().take(m) {
        let v = eig.eigenvectors.column(i).into_owned();
        n.gerc(Complex64::new(1.0, 0.0), &v, &v, Complex64::new(1.0, 0.0));
    }
    Ok(n)
}

/// B_Λ(|k|) at every grid momentum, one evaluation per distinct |k|.
fn b_on_grid(grid: &Grid, dressed: &DressedDirac) -> Result<Vec<f64>> {
    let mut keys: Vec<i64> = (0..grid.len())
        .map(|i| {
            let m = grid.ints(i);
            m.iter().map(|&x| (x as i64).pow(2)).sum()
        })
        .collect();
    let all = keys.clone();
    keys.sort_unstable();
    keys.dedup();
    let vals: Vec<f64> = keys
        .par_iter()
        .map(|&k2| compute_b(grid.k_unit() * (k2 as f64).sqrt(), dressed, 1e-10))
        .collect::<Result<_>>()?;
    let table: HashMap<i64, f64> = keys.into_iter().zip(vals).collect();
    Ok(all.iter().map(|k| table[k]).collect())
}

#[derive(Debug, Clone)]
pub struct ScfState {
    pub gamma: DenseOp,
    pub rho_pp: Density,
    /// ‖Δγ‖₂ + ‖Δρ″‖_C per step.
    pub residual_history: Vec<f64>,
    pub ratio_history: Vec<f64>,
    /// max|ρ̂(Q_{0,2}(ρ″))| / max|ρ̂″| per step (order ≥ 2).
    pub furry_history: Vec<f64>,
}

impl ScfState {
    pub fn total_charge(&self) -> f64 {
        self.rho_pp.integral_fourier()
    }

    pub fn gamma_kernel(&self, lat: &Lattice, compression: &Compression) -> Result<(OperatorKernel, CompressionReport)> {
        lat.to_kernel(&self.gamma, compression)
    }
}

/// One application of F⁽¹⁾.
pub fn f1_step(problem: &ScfProblem, state: &ScfState) -> Result<ScfState> {
    let lat = &problem.lattice;
    let alpha = problem.params.alpha;
    let q_prime = &state.gamma + &problem.n_op;
    let exch_only = mean_field_operator(lat, None, Some(&q_prime));
    let full = mean_field_operator(lat, Some(&state.rho_pp.fourier), Some(&q_prime));

    let mut gamma = lat.zeros();
    let mut rho_hat: Vec<Complex64> = problem.n_pp.fourier.clone();
    let mut furry = None;
    if alpha != 0.0 {
        let q10 = cauchy_dense(lat, 1, &exch_only, Contour::Residue)?;
        for (r, d) in rho_hat.iter_mut().zip(lat.density_hat(&q10)) {
            *r += alpha * d;
        }
        let mut scale = 1.0;
        for ell in 1..=problem.order {
            scale *= alpha;
            let contour = if ell <= 2 { Contour::Residue } else { Contour::Quadrature(problem.nquad) };
            let q = cauchy_dense(lat, ell, &full, contour)?;
            if ell >= 2 {
                for (r, d) in rho_hat.iter_mut().zip(lat.density_hat(&q)) {
                    *r += scale * d;
                }
            }
            gamma += q * Complex64::new(scale, 0.0);
        }
        if problem.order >= 2 {
            let pure_v = mean_field_operator(lat, Some(&state.rho_pp.fourier), None);
            let q02 = cauchy_dense(lat, 2, &pure_v, Contour::Residue)?;
            let d = lat.density_hat(&q02).iter().map(|c| c.norm()).fold(0.0, f64::max);
            let total = state.rho_pp.fourier.iter().map(|c| c.norm()).fold(0.0, f64::max);
            furry = Some(d / total.max(1e-300));
        }
    }
    for (r, b) in rho_hat.iter_mut().zip(&problem.b_lambda) {
        *r /= 1.0 + alpha * b;
    }
    let rho_pp = Density::from_fourier(&lat.grid, rho_hat);

    let dg = (&gamma - &state.gamma).norm();
    let drho = rho_pp.add(&state.rho_pp, -1.0)?.coulomb_norm();
    let residual = dg + drho;
    let mut residual_history = state.residual_history.clone();
    let mut ratio_history = state.ratio_history.clone();
    if let Some(&prev) = residual_history.last() {
        if prev > 0.0 {
            ratio_history.push(residual / prev);
        }
    }
    residual_history.push(residual);
    let mut furry_history = state.furry_history.clone();
    furry_history.extend(furry);
    Ok(ScfState { gamma, rho_pp, residual_history, ratio_history, furry_history })
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual: f64,
    pub ratio: Option<f64>,
    pub total_charge: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScfSummary {
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    /// Geometric mean of the last (up to five) contraction ratios.
    pub contraction: f64,
    /// Coefficient of variation of those ratios.
    pub ratio_spread: f64,
    pub trace0_gamma: f64,
    pub total_charge: f64,
    pub gamma_hs_norm: f64,
    pub furry_max: f64,
    pub electron_rank: usize,
}

/// Iterate F⁽¹⁾ from (0, n − ν) until the residual drops below `tol`.
///
/// Three consecutive ratios ≥ 1 abort with a non-contraction error.
pub fn run(
    problem: &ScfProblem,
    tol: f64,
    max_iter: usize,
    mut on_iter: impl FnMut(&IterationRecord),
) -> Result<(ScfState, ScfSummary)> {
    let mut state = problem.initial_state();
    for it in 1..=max_iter {
        state = f1_step(problem, &state)?;
        let residual = *state.residual_history.last().expect("step records a residual");
        let ratio = (it > 1).then(|| state.ratio_history.last().copied()).flatten();
        on_iter(&IterationRecord { iter: it, residual, ratio, total_charge: state.total_charge() });
        let r = &state.ratio_history;
        if r.len() >= 3 && r[r.len() - 3..].iter().all(|&x| x >= 1.0) {
            return Err(BdfError::NonContraction { ratios: r.clone() });
        }
        if residual < tol {
            let summary = summarize(problem, &state, it, true);
            return Ok((state, summary));
        }
    }
    Err(BdfError::ScfNotConverged {
        iterations: max_iter,
        last: *state.residual_history.last().unwrap_or(&f64::NAN),
        history: state.residual_history.clone(),
    })
}

fn summarize(problem: &ScfProblem, state: &ScfState, iterations: usize, converged: bool) -> ScfSummary {
    // Ratios of residuals near round-off are noise; use the geometric part of the history.
    let usable: Vec<f64> = state
        .ratio_history
        .iter()
        .zip(state.residual_history.iter().skip(1))
        .filter(|(_, &res)| res > 1e-13)
        .map(|(r, _)| *r)
        .collect();
    let tail = &usable[usable.len().saturating_sub(5)..];
    let (mean, spread) = if tail.is_empty() {
        (0.0, 0.0)
    } else {
        let n = tail.len() as f64;
        let geo = (tail.iter().map(|r| r.ln()).sum::<f64>() / n).exp();
        let m = tail.iter().sum::<f64>() / n;
        let var = tail.iter().map(|r| (r - m).powi(2)).sum::<f64>() / n;
        (geo, var.sqrt() / m)
    };
    ScfSummary {
        iterations,
        converged,
        residual: *state.residual_history.last().unwrap_or(&0.0),
        contraction: mean,
        ratio_spread: spread,
        trace0_gamma: problem.lattice.trace0(&state.gamma),
        total_charge: state.total_charge(),
        gamma_hs_norm: state.gamma.norm(),
        furry_max: state.furry_history.iter().copied().fold(0.0, f64::max),
        electron_rank: problem.electron_rank(),
    }
}

/// ρ̂_γ^{lin}(k) = −F_Λ(|k|)(n̂(k) − ν̂(k)) with n = ρ_N.
pub fn linear_response_density(n: &OperatorKernel, nu: &Density, renorm: &RenormFunctions) -> Result<Density> {
    let rho_n = density_of(n);
    let diff = rho_n.add(nu, -1.0)?;
    let g = &nu.grid;
    let k: Vec<f64> = (0..g.len()).map(|i| crate::dressed_dirac::norm3(&g.momentum(i))).collect();
    let f = renorm.big_f_at(&k);
    let hat = diff.fourier.iter().zip(&f).map(|(d, f)| -f * d).collect();
    Ok(Density::from_fourier(g, hat))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChargeCheck {
    /// ∫(ρ^{lin} + n − ν) by radial quadrature in real space.
    pub observed: f64,
    /// (M − Z)/(1 + f_Λ(0)).
    pub formula: f64,
    /// Change of `observed` under doubling the radial resolution.
    pub resolution_change: f64,
}

/// Observed charge for Gaussian n (charge M, width w_n) and ν (charge Z, width w_ν): the
/// linear response is transformed to real space and integrated radially.
pub fn observed_charge(renorm: &RenormFunctions, m: f64, z: f64, w_n: f64, w_nu: f64) -> ChargeCheck {
    let run = |nk: usize, nr: usize| {
        let w_min = w_n.min(w_nu);
        let k_max = (2.0 * renorm.lambda).min(12.0 / w_min);
        let k: Vec<f64> = (0..=nk).map(|i| k_max * i as f64 / nk as f64).collect();
        let big_f = renorm.big_f_at(&k);
        let rho_hat: Vec<f64> = k
            .iter()
            .zip(&big_f)
            .map(|(k, f)| -f * (m * (-0.5 * k * k * w_n * w_n).exp() - z * (-0.5 * k * k * w_nu * w_nu).exp()))
            .collect();
        let w_max = w_n.max(w_nu);
        let r: Vec<f64> = (0..nr).map(|i| 1e-4 * w_min * (60.0 * w_max / (1e-4 * w_min)).powf(i as f64 / (nr - 1) as f64)).collect();
        // Unitary transform times (2π)^{−3/2} gives the density.
        let t = radial_inverse_fourier(&k, &rho_hat, &r);
        let scale = (2.0 * PI).powf(-1.5);
        let y: Vec<f64> = t.r.iter().zip(&t.values).map(|(r, v)| r * r * r * v * scale).collect();
        let mut s = 0.0;
        for i in 0..r.len() - 1 {
            s += 0.5 * (y[i] + y[i + 1]) * (r[i + 1] / r[i]).ln();
        }
        s += r[0].powi(3) * t.values[0] * scale / 3.0;
        m - z + 4.0 * PI * s
    };
    let coarse = run(4000, 800);
    let fine = run(8000, 1600);
    ChargeCheck { observed: fine, formula: (m - z) / (1.0 + renorm.f0()), resolution_change: (fine - coarse).abs() }
}

#[derive(Debug, Clone, Serialize)]
pub struct RenormRow {
    pub alpha: f64,
    pub lambda: f64,
    pub l: f64,
    pub f0: f64,
    pub z3_formula: f64,
    /// Observed charge over M − Z; None for neutral systems.
    pub z3_quadrature: Option<f64>,
    pub tol: f64,
    pub flag: Option<String>,
}

/// Z₃ by formula and by real-space quadrature of the linear response over an (α, Λ) grid.
pub fn renorm_table(alphas: &[f64], lambdas: &[f64], m: f64, z: f64, opts: &RenormOptions) -> Result<Vec<RenormRow>> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        for &lambda in lambdas {
            let params = PhysicalParams::new(alpha, lambda);
            let dressed = dress(&params, 1e-10, 60)?;
            let renorm = assemble(&dressed, opts)?;
            let f0 = renorm.f0();
            let z3_formula = 1.0 / (1.0 + f0);
            let (z3_quadrature, tol, flag) = if m == z {
                (None, 0.0, Some("neutral, ratio undefined".to_string()))
            } else {
                let c = observed_charge(&renorm, m, z, 1.0, 0.5);
                let tol = (10.0 * c.resolution_change / (m - z).abs()).max(1e-9);
                (Some(c.observed / (m - z)), tol, None)
            };
            rows.push(RenormRow { alpha, lambda, l: params.l(), f0, z3_formula, z3_quadrature, tol, flag });
        }
    }
    Ok(rows)
}

/// CSV with header `alpha,lambda,L,f0,Z3_formula,Z3_quadrature,tol`.
pub fn renorm_csv(rows: &[RenormRow]) -> String {
    let mut s = String::from("alpha,lambda,L,f0,Z3_formula,Z3_quadrature,tol\n");
    for r in rows {
        let q = match (r.z3_quadrature, &r.flag) {
            (Some(v), _) => format!("{v:.12e}"),
            (None, Some(f)) => f.clone(),
            (None, None) => String::new(),
        };
        s.push_str(&format!(
            "{:e},{:e},{:.12e},{:.12e},{:.12e},{},{:.3e}\n",
            r.alpha, r.lambda, r.l, r.f0, r.z3_formula, q, r.tol
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdf_operators::ExternalDensity;

    fn params(alpha: f64) -> PhysicalParams {
        PhysicalParams { alpha, lambda: 1e3, electrons: 1, z: 1.0, nu: ExternalDensity::Gaussian { width: 0.5 } }
    }

    #[test]
    fn zero_coupling_is_one_step() {
        let p = params(0.0);
        let d = dress(&p, 1e-10, 10).unwrap();
        let opts = ScfOptions { n: 8, extent: 6.0, ..ScfOptions::default() };
        let prob = ScfProblem::new(&p, &d, &opts).unwrap();
        let (state, summary) = run(&prob, 1e-12, 5, |_| {}).unwrap();
        assert_eq!(summary.iterations, 1);
        assert_eq!(state.gamma.norm(), 0.0);
        let diff = state.rho_pp.add(&prob.n_pp, -1.0).unwrap();
        assert!(diff.values.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn electron_projector_has_rank_m() {
        let p = PhysicalParams { electrons: 2, ..params(0.02) };
        let d = dress(&p, 1e-10, 50).unwrap();
        let prob = ScfProblem::new(&p, &d, &ScfOptions { n: 8, extent: 6.0, ..ScfOptions::default() }).unwrap();
        assert_eq!(prob.electron_rank(), 2);
        let n = &prob.n_op;
        assert!((n * n - n).norm() < 1e-10);
    }

    fn cheap_renorm(alpha: f64) -> RenormFunctions {
        let d = dress(&PhysicalParams::new(alpha, 1e3), 1e-10, 50).unwrap();
        let opts = RenormOptions { j_max: 0, k_nodes: 24, dense_k: 4000, r_nodes: 200, ..RenormOptions::default() };
        assemble(&d, &opts).unwrap()
    }

    #[test]
    fn linear_response_carries_minus_f0() {
        let g = Grid::new(8, 6.0, 1e3).unwrap();
        let nu = Density::gaussian(&g, 1.0, 0.7);
        let renorm = cheap_renorm(0.02);
        let zero = OperatorKernel::zero(&g);
        let lin = linear_response_density(&zero, &Density::zero(&g), &renorm).unwrap();
        assert!(lin.values.iter().all(|v| *v == 0.0));
        // n = 0, so ρ̂(0) = F(0)·ν̂(0) = F(0).
        let lin = linear_response_density(&zero, &nu, &renorm).unwrap();
        let f0 = renorm.big_f_at(&[0.0])[0];
        assert!((lin.integral_fourier() - f0 * nu.integral_fourier()).abs() < 1e-12);
    }

    #[test]
    fn observed_charge_matches_formula() {
        let renorm = cheap_renorm(0.05);
        let c = observed_charge(&renorm, 3.0, 1.0, 1.0, 0.5);
        assert!(((c.observed - c.formula) / c.formula).abs() < 1e-3, "{c:?}");
    }
}
