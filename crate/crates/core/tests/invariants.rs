use std::sync::OnceLock;

use bdf_core::bdf_operators::{Density, Grid, OperatorKernel};
use bdf_core::clifford::{slash, DiracElement};
use bdf_core::dressed_dirac::{dress, DressedDirac};
use bdf_core::fixed_point::{linear_response_density, renorm_table};
use bdf_core::nonrel_hf::{boys0, occupations};
use bdf_core::vacuum_polarization::{assemble, RenormFunctions, RenormOptions};
use bdf_core::PhysicalParams;
use nalgebra::Matrix4;
use num_complex::Complex64;
use proptest::prelude::*;

const LAMBDA: f64 = 1e3;

fn dressed() -> &'static DressedDirac {
    static D: OnceLock<DressedDirac> = OnceLock::new();
    D.get_or_init(|| dress(&PhysicalParams::new(0.02, LAMBDA), 1e-10, 50).unwrap())
}

fn cheap_opts() -> RenormOptions {
    RenormOptions { j_max: 0, k_nodes: 24, dense_k: 4000, r_nodes: 200, ..RenormOptions::default() }
}

fn renorm() -> &'static RenormFunctions {
    static R: OnceLock<RenormFunctions> = OnceLock::new();
    R.get_or_init(|| assemble(dressed(), &cheap_opts()).unwrap())
}

fn vec4() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-3.0..3.0f64)
}

fn ball() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-0.57 * LAMBDA..0.57 * LAMBDA)
}

proptest! {
    #[test]
    fn slash_squares_to_norm(v in vec4()) {
        let s = slash(&v);
        let n2: f64 = v.iter().map(|x| x * x).sum();
        let diff = s.entries * s.entries - Matrix4::<Complex64>::identity() * Complex64::from(n2);
        prop_assert!(diff.norm() < 1e-12 * (1.0 + n2));
    }

    #[test]
    fn odd_products_are_traceless(word in prop::collection::vec(vec4(), 1..8)) {
        let mut acc = DiracElement::identity();
        let mut scale = 1.0;
        for v in &word {
            acc = &acc * &slash(v);
            scale *= v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        }
        let t = acc.trace().norm();
        if word.len() % 2 == 1 {
            prop_assert!(t < 1e-12 * scale, "trace {}", t);
        }
    }

    #[test]
    fn sign_vector_is_unit_and_squares(p in ball()) {
        let d = dressed();
        let s = d.sign_vector(&p).unwrap();
        prop_assert!((s.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        let m = d.dirac_matrix(&p).unwrap().entries;
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let e2 = d.script_e(r).powi(2);
        let diff = m * m - Matrix4::<Complex64>::identity() * Complex64::from(e2);
        prop_assert!(diff.norm() < 1e-10 * e2);
    }

    #[test]
    fn radial_functions_obey_bounds(r in 0.0..LAMBDA) {
        let rad = dressed().radial(r);
        let tol = 1e-9 * (1.0 + r);
        prop_assert!(rad.g0 >= 1.0 - 1e-12);
        prop_assert!(rad.g1 >= r - tol);
        prop_assert!(rad.g1 <= rad.g0 * r + tol);
        prop_assert!(rad.e >= 1.0 - 1e-12);
    }

    #[test]
    fn occupations_fill_m(m in 0.0..12.0f64, extra in 0usize..4) {
        let n = (m / 2.0).ceil() as usize + extra + 1;
        let occ = occupations(m, n).unwrap();
        let all: Vec<f64> = occ.iter().flatten().copied().collect();
        prop_assert!(all.iter().all(|o| (0.0..=1.0).contains(o)));
        prop_assert!((all.iter().sum::<f64>() - m).abs() < 1e-12);
        // Spin-up never holds fewer electrons than spin-down.
        prop_assert!(occ[0].iter().sum::<f64>() >= occ[1].iter().sum::<f64>() - 1e-12);
    }

    #[test]
    fn boys_decreases(t in 0.0..50.0f64, dt in 1e-3..5.0f64) {
        prop_assert!(boys0(t + dt) < boys0(t));
        prop_assert!(boys0(t) <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn linear_response_commutes_with_translation(shift in prop::array::uniform3(-3i32..4)) {
        let g = Grid::new(8, 6.0, LAMBDA).unwrap();
        let zero = OperatorKernel::zero(&g);
        let nu = Density::gaussian(&g, 1.0, 0.8);
        let a = linear_response_density(&zero, &nu, renorm()).unwrap().translated(shift);
        let b = linear_response_density(&zero, &nu.translated(shift), renorm()).unwrap();
        let worst = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = a.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-10 * scale, "{} vs {}", worst, scale);
    }
}

#[test]
fn charge_renormalization_grows_with_cutoff() {
    let rows = renorm_table(&[0.01, 0.02], &[1e2, 1e3, 1e4], 1.0, 0.0, &cheap_opts()).unwrap();
    for alpha in [0.01, 0.02] {
        let z3: Vec<f64> = rows.iter().filter(|r| r.alpha == alpha).map(|r| r.z3_formula).collect();
        assert_eq!(z3.len(), 3);
        assert!(z3.windows(2).all(|w| w[1] < w[0]), "{z3:?}");
        assert!(z3.iter().all(|&z| z > 0.0 && z < 1.0));
    }
    // Stronger coupling screens more at equal cutoff.
    let at = |a: f64| rows.iter().find(|r| r.alpha == a && r.lambda == 1e3).unwrap().z3_formula;
    assert!(at(0.02) < at(0.01));
}
