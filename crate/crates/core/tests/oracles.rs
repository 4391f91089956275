//! Comparisons against values known independently of this code.

use bdf_core::nonrel_hf::{scf_minimize, BasisSpec, ScfSettings};

/// The one-electron screened functional is a Choquard problem: its minimum is −0.10851/2 at
/// a = 1 and scales as a².
#[test]
fn pekar_constant() {
    let st = scf_minimize(0.0, 1.0, 0.2, &BasisSpec::wide(), &ScfSettings::default()).unwrap();
    let ratio = st.energy.total / 0.04;
    assert!((ratio + 0.05425).abs() < 2e-4, "{ratio}");
}

/// Unscreened helium in the Hartree-Fock limit: −2.86168.
#[test]
fn helium_hartree_fock_limit() {
    let st = scf_minimize(2.0, 2.0, 0.0, &BasisSpec::wide(), &ScfSettings::default()).unwrap();
    assert!((st.energy.total + 2.86168).abs() < 2e-3, "{}", st.energy.total);
}
