//! Numerics for the Bogoliubov–Dirac–Fock mean-field model of QED.
//!
//! The crate is organized bottom-up: [`clifford`] (ℂ⁴ Dirac algebra),
//! [`dressed_dirac`] (the self-consistent free operator), [`vacuum_polarization`]
//! (B_Λ, f_Λ, F_Λ and Z₃), [`bdf_operators`] (grid/lattice representation of
//! states and the Cauchy expansion), [`fixed_point`] (the Banach–Picard scheme)
//! and [`nonrel_hf`] (screened nonrelativistic Hartree–Fock).

pub mod bdf_operators;
pub mod clifford;
pub mod dressed_dirac;
pub mod error;
pub mod fixed_point;
pub mod nonrel_hf;
pub mod quadrature;
pub mod vacuum_polarization;

pub use clifford::{DiracElement, Grading};
pub use dressed_dirac::{DressedDirac, PhysicalParams};
pub use error::{BdfError, Result};
