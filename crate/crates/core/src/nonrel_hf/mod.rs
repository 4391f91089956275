//! Screened nonrelativistic Hartree–Fock: the energy
//!   ½Tr(−ΔΓ) − Z(1−a)Tr(Γ/|x|) + ½(D(ρ,ρ) − Ex[Γ]) − (a/2)D(ρ,ρ)
//! for ℂ²-valued orbitals (collinear spin), minimized by a damped Roothaan iteration in an
//! even-tempered s-Gaussian basis.

mod basis;
mod probes;

pub use basis::{boys0, Basis, BasisSpec, Integrals};
pub use probes::{
    binding_test, concavity_probe, pekar_scaling, spinor_projector_defect, virial_derivative, BindingOptions, BindingReport,
    ConcavityReport, PekarReport,
};

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{BdfError, Result};
use crate::vacuum_polarization::RenormFunctions;

/// a = f_Λ(0)/(1 + f_Λ(0)).
pub fn screening_constant(renorm: &RenormFunctions) -> f64 {
    let f0 = renorm.f0();
    f0 / (1.0 + f0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NrEnergy {
    pub kinetic: f64,
    pub nuclear: f64,
    /// ½D(ρ,ρ).
    pub direct: f64,
    /// −½Ex[Γ].
    pub exchange: f64,
    /// −(a/2)D(ρ,ρ).
    pub pekar: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScfSettings {
    /// Weight θ of the new density in P ← (1−θ)P + θP_new.
    pub damping: f64,
    /// Target for max|Xᵀ(FPS − SPF)X| in the orthonormalized basis.
    pub tol: f64,
    /// DIIS history length; 0 switches to plain damping.
    pub diis: usize,
    pub max_iter: usize,
    /// Largest allowed overlap condition number.
    pub max_condition: f64,
}

impl Default for ScfSettings {
    fn default() -> Self {
        ScfSettings { damping: 0.5, tol: 1e-8, diis: 8, max_iter: 500, max_condition: 1e10 }
    }
}

#[derive(Debug, Clone)]
pub struct NrState {
    pub a: f64,
    pub z: f64,
    pub m: f64,
    pub basis: Basis,
    /// Per spin (↑, ↓): S-orthonormal orbitals as columns, sorted by orbital energy.
    pub coeffs: [DMatrix<f64>; 2],
    pub occ: [Vec<f64>; 2],
    /// Fock eigenvalues per spin, same order as the columns.
    pub levels: [Vec<f64>; 2],
    pub energy: NrEnergy,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
}

impl NrState {
    /// AO density matrices Σ occ_j c_j c_jᵀ per spin.
    pub fn densities(&self) -> [DMatrix<f64>; 2] {
        [0, 1].map(|s| density_matrix(&self.coeffs[s], &self.occ[s]))
    }

    /// ε_j = −(orbital energy) of every occupied orbital, ascending.
    pub fn eps(&self) -> Vec<f64> {
        let mut e: Vec<f64> = (0..2)
            .flat_map(|s| self.levels[s].iter().zip(&self.occ[s]).filter(|(_, &o)| o > 0.0).map(|(l, _)| -l))
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// max |CᵀSC − 1| over both spins.
    pub fn orthonormality_defect(&self) -> f64 {
        let s = Integrals::new(&self.basis).overlap;
        self.coeffs
            .iter()
            .map(|c| {
                let g = c.transpose() * &s * c;
                (g - DMatrix::identity(c.ncols(), c.ncols())).abs().max()
            })
            .fold(0.0, f64::max)
    }

    /// Radial profile ψ_j(r) of the occupied orbitals along the z axis.
    pub fn radial_profiles(&self, r: &[f64]) -> Vec<(usize, usize, Vec<f64>)> {
        let mut out = Vec::new();
        for s in 0..2 {
            for (j, &o) in self.occ[s].iter().enumerate() {
                if o > 0.0 {
                    let c: Vec<f64> = self.coeffs[s].column(j).iter().copied().collect();
                    out.push((s, j, r.iter().map(|&r| self.basis.eval(&c, [0.0, 0.0, r])).collect()));
                }
            }
        }
        out
    }
}

fn density_matrix(c: &DMatrix<f64>, occ: &[f64]) -> DMatrix<f64> {
    let n = c.nrows();
    let mut p = DMatrix::zeros(n, n);
    for (j, &o) in occ.iter().enumerate() {
        if o > 0.0 {
            let v = c.column(j);
            p += o * &v * v.transpose();
        }
    }
    p
}

/// Occupations per spin for M electrons: electrons alternate ↑, ↓, ↑, … and a fractional
/// remainder sits in the next slot.
pub fn occupations(m: f64, n_orb: usize) -> Result<[Vec<f64>; 2]> {
    if !(m >= 0.0) || m > 2.0 * n_orb as f64 {
        return Err(BdfError::InvalidInput(format!("electron count {m} outside [0, {}]", 2 * n_orb)));
    }
    let mut occ = [vec![0.0; n_orb], vec![0.0; n_orb]];
    let slots = m.ceil() as usize;
    for k in 0..slots {
        occ[k % 2][k / 2] = (m - k as f64).min(1.0);
    }
    Ok(occ)
}

/// Energy of the state with AO densities `p` in the given integrals.
pub fn energy_of(ints: &Integrals, z: f64, a: f64, p: &[DMatrix<f64>; 2]) -> NrEnergy {
    let total = &p[0] + &p[1];
    let kinetic = (&total * &ints.kinetic).trace();
    let nuclear = -z * (1.0 - a) * (&total * &ints.nuclear).trace();
    let d = (&total * ints.coulomb(&total)).trace();
    let ex: f64 = p.iter().map(|ps| (ps * ints.exchange(ps)).trace()).sum();
    let direct = 0.5 * d;
    let exchange = -0.5 * ex;
    let pekar = 0.0 - 0.5 * a * d;
    NrEnergy { kinetic, nuclear, direct, exchange, pekar, total: kinetic + nuclear + direct + exchange + pekar }
}

pub fn nr_energy(state: &NrState) -> NrEnergy {
    energy_of(&Integrals::new(&state.basis), state.z, state.a, &state.densities())
}

fn fock(ints: &Integrals, h: &DMatrix<f64>, a: f64, p: &[DMatrix<f64>; 2]) -> [DMatrix<f64>; 2] {
    let j = ints.coulomb(&(&p[0] + &p[1])) * (1.0 - a);
    [0, 1].map(|s| h + &j - ints.exchange(&p[s]))
}

/// Generalized eigenproblem F c = λ S c through X = U s^{−1/2}.
fn solve(f: &DMatrix<f64>, x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let fp = x.transpose() * f * x;
    let eig = fp.symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_iterator(idx.len(), idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(x.nrows(), idx.len());
    for (k, &i) in idx.iter().enumerate() {
        let mut c = x * eig.eigenvectors.column(i);
        // Fix the sign so results do not depend on the eigensolver.
        let pivot = c.iter().copied().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            c = -c;
        }
        vecs.set_column(k, &c);
    }
    (vals, vecs)
}

fn orthogonalizer(s: &DMatrix<f64>, max_condition: f64) -> Result<DMatrix<f64>> {
    let eig = s.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 || max / min > max_condition {
        return Err(BdfError::Basis(if min <= 0.0 { f64::INFINITY } else { max / min }));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e.sqrt()));
    Ok(&eig.eigenvectors * d)
}

/// Pulay extrapolation Σ cᵢFᵢ with Σ cᵢ = 1 minimizing |Σ cᵢeᵢ|. Drops the oldest entries
/// while the system is singular.
fn diis_extrapolate(history: &mut VecDeque<([DMatrix<f64>; 2], [DMatrix<f64>; 2])>) -> Option<[DMatrix<f64>; 2]> {
    while history.len() >= 2 {
        let k = history.len();
        let mut b = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for i in 0..k {
            for j in 0..k {
                b[(i, j)] = (0..2).map(|s| history[i].1[s].dot(&history[j].1[s])).sum::<f64>();
            }
            b[(i, k)] = -1.0;
            b[(k, i)] = -1.0;
        }
        rhs[k] = -1.0;
        let scale = (0..k).map(|i| b[(i, i)]).fold(0.0, f64::max);
        if scale > 0.0 {
            for i in 0..k {
                for j in 0..k {
                    b[(i, j)] /= scale;
                }
            }
        }
        match b.lu().solve(&rhs) {
            Some(c) if c.iter().all(|v| v.is_finite()) && c.rows(0, k).amax() < 1e6 => {
                let mut out = [DMatrix::zeros(history[0].0[0].nrows(), history[0].0[0].ncols()), DMatrix::zeros(history[0].0[0].nrows(), history[0].0[0].ncols())];
                for (i, (f, _)) in history.iter().enumerate() {
                    for s in 0..2 {
                        out[s] += &f[s] * c[i];
                    }
                }
                return Some(out);
            }
            _ => {
                history.pop_front();
            }
        }
    }
    None
}

/// SCF for nuclear charge Z, M electrons (possibly fractional) and screening a: DIIS-accelerated
/// Roothaan steps, or plain density damping when `settings.diis` is 0.
pub fn scf_minimize(z: f64, m: f64, a: f64, spec: &BasisSpec, settings: &ScfSettings) -> Result<NrState> {
    spec.validate()?;
    if !(0.0..1.0).contains(&a) {
        return Err(BdfError::InvalidInput(format!("screening constant a = {a} must lie in [0, 1)")));
    }
    if !(z >= 0.0) {
        return Err(BdfError::InvalidInput(format!("nuclear charge Z = {z} must be ≥ 0")));
    }
    let basis = Basis::atomic(spec);
    let ints = Integrals::new(&basis);
    let x = orthogonalizer(&ints.overlap, settings.max_condition)?;
    let occ = occupations(m, basis.len())?;
    let z0 = z * (1.0 - a);
    let h = &ints.kinetic - &ints.nuclear * z0;
    // Start from the hydrogen-like problem with charge max(Z₀, a); for Z = 0 this sits near the
    // Pekar length scale.
    let guess_h = &ints.kinetic - &ints.nuclear * z0.max(a);
    let (l0, c0) = solve(&guess_h, &x);
    let mut p = [0, 1].map(|s| density_matrix(&c0, &occ[s]));
    let mut coeffs = [c0.clone(), c0];
    let mut levels = [l0.as_slice().to_vec(), l0.as_slice().to_vec()];
    let mut residual_history = Vec::new();
    let mut energy_history = Vec::new();
    let mut history: VecDeque<([DMatrix<f64>; 2], [DMatrix<f64>; 2])> = VecDeque::new();
    for it in 1..=settings.max_iter {
        let f = fock(&ints, &h, a, &p);
        let err = [0, 1].map(|s| {
            let fps = &f[s] * &p[s] * &ints.overlap;
            x.transpose() * (&fps - fps.transpose()) * &x
        });
        let residual = err.iter().map(|e| e.abs().max()).fold(0.0, f64::max);
        residual_history.push(residual);
        energy_history.push(energy_of(&ints, z, a, &p).total);
        if residual < settings.tol {
            for s in 0..2 {
                let (l, c) = solve(&f[s], &x);
                levels[s] = l.as_slice().to_vec();
                coeffs[s] = c;
            }
            let fresh = [0, 1].map(|s| density_matrix(&coeffs[s], &occ[s]));
            let energy = energy_of(&ints, z, a, &fresh);
            return Ok(NrState {
                a,
                z,
                m,
                basis,
                coeffs,
                occ,
                levels,
                energy,
                iterations: it,
                residual_history,
                energy_history,
            });
        }
        let f_used = if settings.diis > 0 {
            history.push_back((f.clone(), err));
            if history.len() > settings.diis {
                history.pop_front();
            }
            diis_extrapolate(&mut history).unwrap_or(f)
        } else {
            f
        };
        for s in 0..2 {
            let (l, c) = solve(&f_used[s], &x);
            levels[s] = l.as_slice().to_vec();
            coeffs[s] = c;
        }
        let fresh = [0, 1].map(|s| density_matrix(&coeffs[s], &occ[s]));
        p = if settings.diis > 0 {
            fresh
        } else {
            let t = settings.damping;
            [0, 1].map(|s| &p[s] * (1.0 - t) + &fresh[s] * t)
        };
    }
    Err(BdfError::ScfNotConverged {
        iterations: settings.max_iter,
        last: *residual_history.last().unwrap_or(&f64::NAN),
        history: residual_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Spin-orbital HF energy from MO integrals, an independent route to the a = 0 energy.
    fn mo_energy(state: &NrState) -> f64 {
        let ints = Integrals::new(&state.basis);
        let h = &ints.kinetic - &ints.nuclear * state.z;
        let mut orbs: Vec<(usize, DVector<f64>, f64)> = Vec::new();
        for s in 0..2 {
            for (j, &o) in state.occ[s].iter().enumerate() {
                if o > 0.0 {
                    orbs.push((s, state.coeffs[s].column(j).into_owned(), o));
                }
            }
        }
        let n = ints.n;
        let pair = |u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>, x: &DVector<f64>| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            s += u[i] * v[j] * w[k] * x[l] * ints.eri(i, j, k, l);
                        }
                    }
                }
            }
            s
        };
        let mut e = 0.0;
        for (_, c, o) in &orbs {
            e += o * (c.transpose() * &h * c)[(0, 0)];
        }
        for (si, ci, oi) in &orbs {
            for (sj, cj, oj) in &orbs {
                e += 0.5 * oi * oj * pair(ci, ci, cj, cj);
                if si == sj {
                    e -= 0.5 * oi * oj * pair(ci, cj, cj, ci);
                }
            }
        }
        e
    }

    #[test]
    fn hydrogen_ground_state() {
        let st = scf_minimize(1.0, 1.0, 0.0, &BasisSpec::default(), &ScfSettings::default()).unwrap();
        assert!((st.energy.total + 0.5).abs() < 5e-3, "{:?}", st.energy);
        assert!(st.orthonormality_defect() < 1e-10);
        // One electron: direct and exchange cancel.
        assert!((st.energy.direct + st.energy.exchange).abs() < 1e-10);
    }

    #[test]
    fn helium_matches_mo_formula() {
        let st = scf_minimize(2.0, 2.0, 0.0, &BasisSpec::default(), &ScfSettings::default()).unwrap();
        assert!((st.energy.total - mo_energy(&st)).abs() < 1e-10);
        // Hartree–Fock limit −2.86168.
        assert!((st.energy.total + 2.8617).abs() < 5e-3, "{}", st.energy.total);
    }

    #[test]
    fn rank_one_cancellation_with_screening() {
        let st = scf_minimize(1.0, 1.0, 0.3, &BasisSpec::default(), &ScfSettings::default()).unwrap();
        let e = st.energy;
        assert!((e.direct + e.exchange).abs() < 1e-10);
        assert!((e.total - (e.kinetic + e.nuclear + e.pekar)).abs() < 1e-12);
    }

    #[test]
    fn occupation_pattern() {
        let o = occupations(2.5, 3).unwrap();
        assert_eq!(o[0], vec![1.0, 0.5, 0.0]);
        assert_eq!(o[1], vec![1.0, 0.0, 0.0]);
        assert!(occupations(7.0, 3).is_err());
    }

    #[test]
    fn near_dependent_basis_is_rejected() {
        let spec = BasisSpec { alpha0: 0.1, beta: 1.01, n: 12 };
        assert!(matches!(scf_minimize(1.0, 1.0, 0.0, &spec, &ScfSettings::default()), Err(BdfError::Basis(_))));
    }

    #[test]
    fn screening_constant_bounds() {
        assert!(scf_minimize(1.0, 1.0, 1.0, &BasisSpec::default(), &ScfSettings::default()).is_err());
    }
}
