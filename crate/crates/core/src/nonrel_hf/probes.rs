//! Binding, concavity, scaling and virial diagnostics built on `scf_minimize`.

use nalgebra::{DMatrix, DVector, Vector4};
use num_complex::Complex64;
use serde::Serialize;

use super::basis::{BasisSpec, Integrals};
use super::{energy_of, scf_minimize, NrState, ScfSettings};
use crate::clifford::make_dirac_basis;
use crate::error::{BdfError, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BindingOptions {
    /// Cut-off radius R of the trial state; the extra electron sits at distance 5R.
    pub r: f64,
}

impl Default for BindingOptions {
    fn default() -> Self {
        BindingOptions { r: 40.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BindingReport {
    pub z: f64,
    pub m: usize,
    pub a: f64,
    pub e_m: f64,
    pub e_m_minus_1: f64,
    pub e0_1: f64,
    /// E(M−1) + E⁰(1) − E(M).
    pub gap: f64,
    /// a = 0, Z = 0: E⁰(1) = 0 is an infimum that is not attained.
    pub degenerate: bool,
    pub trial_energy: f64,
    /// E(M−1) + E⁰(1) + ((M−1)(1−a) − Z(1−a))/(5R).
    pub trial_prediction: f64,
    pub trial_above_e_m: bool,
}

fn padded(c: &DMatrix<f64>, rows: usize, offset: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, c.ncols());
    out.view_mut((offset, 0), (c.nrows(), c.ncols())).copy_from(c);
    out
}

/// Three independent SCF runs for E(M), E(M−1) and E⁰(1), plus the energy of the trial state
/// Γ_{M−1} + |φ₀(· − 5R e_z)⟩⟨φ₀(· − 5R e_z)|.
pub fn binding_test(z: f64, m: usize, a: f64, spec: &BasisSpec, settings: &ScfSettings, opts: &BindingOptions) -> Result<BindingReport> {
    if m == 0 {
        return Err(BdfError::InvalidInput("binding test needs M ≥ 1".into()));
    }
    let st_m = scf_minimize(z, m as f64, a, spec, settings)?;
    let st_m1 = scf_minimize(z, (m - 1) as f64, a, spec, settings)?;
    let degenerate = a == 0.0 && z == 0.0;
    let st0 = scf_minimize(0.0, 1.0, a, spec, settings)?;
    let e0 = if degenerate { 0.0 } else { st0.energy.total };

    let d = 5.0 * opts.r;
    let basis = st_m1.basis.concat(&st0.basis.shifted([0.0, 0.0, d]));
    let n1 = st_m1.basis.len();
    let n = basis.len();
    let ints = Integrals::new(&basis);
    let mut p = st_m1.densities().map(|ps| {
        let mut big = DMatrix::zeros(n, n);
        big.view_mut((0, 0), (n1, n1)).copy_from(&ps);
        big
    });
    let spin = (m - 1) % 2;
    let mut phi: DVector<f64> = padded(&st0.coeffs[0].columns(0, 1).into_owned(), n, n1).column(0).into_owned();
    let occupied = padded(&st_m1.coeffs[spin], n, 0);
    for (j, &o) in st_m1.occ[spin].iter().enumerate() {
        if o > 0.0 {
            let c = occupied.column(j);
            let proj = (c.transpose() * &ints.overlap * &phi)[(0, 0)];
            phi -= proj * c;
        }
    }
    let nrm = (phi.transpose() * &ints.overlap * &phi)[(0, 0)].sqrt();
    phi /= nrm;
    p[spin] += &phi * phi.transpose();
    let trial_energy = energy_of(&ints, z, a, &p).total;
    let z0 = z * (1.0 - a);
    let trial_prediction = st_m1.energy.total + e0 + ((m - 1) as f64 * (1.0 - a) - z0) / d;
    Ok(BindingReport {
        z,
        m,
        a,
        e_m: st_m.energy.total,
        e_m_minus_1: st_m1.energy.total,
        e0_1: e0,
        gap: st_m1.energy.total + e0 - st_m.energy.total,
        degenerate,
        trial_energy,
        trial_prediction,
        trial_above_e_m: trial_energy >= st_m.energy.total,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcavityReport {
    pub m: Vec<f64>,
    pub energies: Vec<f64>,
    /// 2·(linear interpolation of the neighbours − E_i); the usual second difference on a
    /// uniform grid, ≤ 0 for a concave function.
    pub second_differences: Vec<f64>,
    pub max_second_difference: f64,
    pub occupations_ok: bool,
}

pub fn concavity_probe(z: f64, a: f64, spec: &BasisSpec, settings: &ScfSettings, m_grid: &[f64]) -> Result<ConcavityReport> {
    if m_grid.len() < 3 || m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BdfError::InvalidInput("concavity probe needs ≥ 3 increasing M values".into()));
    }
    let states = m_grid.iter().map(|&m| scf_minimize(z, m, a, spec, settings)).collect::<Result<Vec<NrState>>>()?;
    let energies: Vec<f64> = states.iter().map(|s| s.energy.total).collect();
    let occupations_ok = states.iter().zip(m_grid).all(|(s, &m)| {
        let all = s.occ.iter().flatten();
        let sum: f64 = all.clone().sum();
        all.clone().all(|&o| (0.0..=1.0).contains(&o)) && (sum - m).abs() < 1e-12
    });
    let second_differences: Vec<f64> = (1..m_grid.len() - 1)
        .map(|i| {
            let (h1, h2) = (m_grid[i] - m_grid[i - 1], m_grid[i + 1] - m_grid[i]);
            let interp = (h2 * energies[i - 1] + h1 * energies[i + 1]) / (h1 + h2);
            2.0 * (interp - energies[i])
        })
        .collect();
    let max_second_difference = second_differences.iter().copied().fold(f64::MIN, f64::max);
    Ok(ConcavityReport { m: m_grid.to_vec(), energies, second_differences, max_second_difference, occupations_ok })
}

#[derive(Debug, Clone, Serialize)]
pub struct PekarReport {
    pub a: Vec<f64>,
    pub energies: Vec<f64>,
    /// E⁰(1; a)/a².
    pub ratios: Vec<f64>,
    /// (max − min)/|mean| of the ratios.
    pub relative_spread: f64,
}

/// E⁰(1) over a set of screening constants; the functional scales as a² exactly.
pub fn pekar_scaling(a_values: &[f64], spec: &BasisSpec, settings: &ScfSettings) -> Result<PekarReport> {
    let energies = a_values
        .iter()
        .map(|&a| scf_minimize(0.0, 1.0, a, spec, settings).map(|s| s.energy.total))
        .collect::<Result<Vec<f64>>>()?;
    let ratios: Vec<f64> = energies.iter().zip(a_values).map(|(e, a)| e / (a * a)).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max = ratios.iter().copied().fold(f64::MIN, f64::max);
    let min = ratios.iter().copied().fold(f64::MAX, f64::min);
    Ok(PekarReport { a: a_values.to_vec(), energies, ratios, relative_spread: (max - min) / mean.abs() })
}

/// dE/dλ at λ = 1 for the dilation ψ ↦ λ^{3/2}ψ(λ·) of every orbital (central difference).
pub fn virial_derivative(state: &NrState) -> f64 {
    let h = 1e-4;
    let p = state.densities();
    let e = |l: f64| energy_of(&Integrals::new(&state.basis.dilated(l)), state.z, state.a, &p).total;
    (e(1.0 + h) - e(1.0 - h)) / (2.0 * h)
}

/// max |(1+β)/2 ψ| over sample points, with each spin orbital embedded in the lower two
/// spinor components.
pub fn spinor_projector_defect(state: &NrState) -> f64 {
    let beta = make_dirac_basis().beta.entries;
    let proj = (nalgebra::Matrix4::<Complex64>::identity() + beta) * Complex64::new(0.5, 0.0);
    let r: Vec<f64> = (0..40).map(|i| 0.05 * 1.2f64.powi(i)).collect();
    let mut worst: f64 = 0.0;
    for (s, _, prof) in state.radial_profiles(&r) {
        for v in prof {
            let mut psi = Vector4::zeros();
            psi[2 + s] = Complex64::new(v, 0.0);
            worst = worst.max((proj * psi).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pekar_energy_is_negative_and_scales() {
        let rep = pekar_scaling(&[0.2, 0.4], &BasisSpec::wide(), &ScfSettings::default()).unwrap();
        assert!(rep.energies.iter().all(|&e| e < 0.0));
        assert!(rep.relative_spread < 0.02, "{rep:?}");
    }

    #[test]
    fn hydrogen_virial() {
        let st = scf_minimize(1.0, 1.0, 0.0, &BasisSpec::default(), &ScfSettings::default()).unwrap();
        let d = virial_derivative(&st);
        // For Coulomb systems dE/dλ = 2T + V = T + E.
        assert!((d - (st.energy.kinetic + st.energy.total)).abs() < 1e-6);
        assert!(d.abs() < 1e-3 * st.energy.total.abs(), "{d}");
    }

    #[test]
    fn lower_components_only() {
        let st = scf_minimize(2.0, 2.0, 0.1, &BasisSpec::default(), &ScfSettings::default()).unwrap();
        assert_eq!(spinor_projector_defect(&st), 0.0);
    }
}
