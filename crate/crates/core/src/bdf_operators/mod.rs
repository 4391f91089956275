//! Grid and lattice representations of BDF states: kernels, densities, Coulomb and exchange
//! terms, the energy, the Cauchy-expansion terms and numerical inequality checks.

pub mod cauchy;
pub mod density;
pub mod grid;
pub mod inequalities;
pub mod kernel;
pub mod lattice;

pub use cauchy::{cauchy_dense, cauchy_term, cauchy_term_with, mean_field_operator, Contour, CauchyOutput};
pub use density::{coulomb_bilinear, Density};
pub use grid::Grid;
pub use inequalities::{inequality_suite, k_constant, InequalityOptions, InequalityReport};
pub use kernel::{bdf_energy, density_of, exchange_kernel, EnergyTerms, OperatorKernel, Spinor};
pub use lattice::{Compression, CompressionReport, DenseOp, Lattice};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExternalDensity {
    None,
    Gaussian { width: f64 },
}

impl ExternalDensity {
    /// ν on the grid with total charge z.
    pub fn on_grid(&self, grid: &Grid, z: f64) -> Density {
        match *self {
            ExternalDensity::None => Density::zero(grid),
            ExternalDensity::Gaussian { width } => Density::gaussian(grid, z, width),
        }
    }
}
