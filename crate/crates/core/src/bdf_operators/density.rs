//! Real densities on the grid and the Coulomb bilinear form.

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{BdfError, Result};

#[derive(Debug, Clone)]
pub struct Density {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// ρ̂(k) = ∫ρ e^{−ik·x}.
    pub fourier: Vec<Complex64>,
}

impl Density {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Density {
        assert_eq!(values.len(), grid.len());
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let fourier = grid.to_fourier(&c);
        Density { grid: grid.clone(), values, fourier }
    }

    /// Build from Fourier coefficients; the imaginary part of the real-space field is dropped.
    pub fn from_fourier(grid: &Grid, fourier: Vec<Complex64>) -> Density {
        let values = grid.from_fourier(&fourier).iter().map(|c| c.re).collect();
        Density { grid: grid.clone(), values, fourier }
    }

    pub fn zero(grid: &Grid) -> Density {
        Density { grid: grid.clone(), values: vec![0.0; grid.len()], fourier: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Density {
        let v = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Density::from_values(grid, v)
    }

    /// Normalized Gaussian charge ∫ν = z with the given width (standard deviation per axis).
    pub fn gaussian(grid: &Grid, z: f64, width: f64) -> Density {
        let norm = z / (2.0 * std::f64::consts::PI * width * width).powf(1.5);
        Density::from_fn(grid, |x| norm * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * width * width)).exp())
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dv()
    }

    pub fn integral_fourier(&self) -> f64 {
        self.fourier[0].re
    }

    pub fn add(&self, other: &Density, scale: f64) -> Result<Density> {
        check_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + scale * b).collect();
        let fourier = self.fourier.iter().zip(&other.fourier).map(|(a, b)| a + scale * b).collect();
        Ok(Density { grid: self.grid.clone(), values, fourier })
    }

    pub fn scaled(&self, s: f64) -> Density {
        Density {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            fourier: self.fourier.iter().map(|v| v * s).collect(),
        }
    }

    /// ‖ρ‖_C = √D(ρ, ρ).
    pub fn coulomb_norm(&self) -> f64 {
        coulomb_bilinear(self, self).map(|d| d.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// Potential v_ρ = ρ ∗ |x|⁻¹ with the truncated kernel.
    pub fn potential(&self) -> Vec<f64> {
        let w = self.grid.coulomb_kernel();
        let vh: Vec<Complex64> = self.fourier.iter().zip(&w).map(|(r, w)| r * w).collect();
        self.grid.from_fourier(&vh).iter().map(|c| c.re).collect()
    }

    pub fn translated(&self, shift: [i32; 3]) -> Density {
        let g = &self.grid;
        let mut values = vec![0.0; g.len()];
        for (i, v) in self.values.iter().enumerate() {
            let s = g.split(i);
            let j = g.join([s[0] as i32 + shift[0], s[1] as i32 + shift[1], s[2] as i32 + shift[2]]);
            values[j] = *v;
        }
        Density::from_values(g, values)
    }
}

pub(crate) fn check_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(BdfError::GridMismatch);
    }
    Ok(())
}

/// V⁻¹ Σ_k W(k) â(−k) b̂(k), the Coulomb pairing ∫∫ a(x) b(y) / |x−y| of two (possibly
/// complex) fields given by their Fourier coefficients.
pub fn coulomb_pairing(grid: &Grid, kernel: &[f64], a_hat: &[Complex64], b_hat: &[Complex64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..grid.len() {
        s += kernel[i] * a_hat[grid.negate(i)] * b_hat[i];
    }
    s / grid.volume()
}

/// D(ρ₁, ρ₂) = ∫∫ ρ₁(x)ρ₂(y)/|x−y|.
pub fn coulomb_bilinear(a: &Density, b: &Density) -> Result<f64> {
    check_grid(&a.grid, &b.grid)?;
    let w = a.grid.coulomb_kernel();
    let s: f64 = a.fourier.iter().zip(&b.fourier).zip(&w).map(|((x, y), w)| w * (x.conj() * y).re).sum();
    Ok(s / a.grid.volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn two_integrals_agree() {
        let g = Grid::new(16, 10.0, 100.0).unwrap();
        let d = Density::gaussian(&g, 1.3, 0.7);
        assert!((d.integral() - d.integral_fourier()).abs() < 1e-10 * 1.3);
        assert!((d.integral() - 1.3).abs() < 1e-8);
    }

    #[test]
    fn gaussian_self_energy() {
        // Two Gaussians of exponent 2 (|φ|² for φ ∝ e^{−x²}): D = 2√(ab/(π(a+b))) = 2/√π.
        let g = Grid::new(48, 12.0, 100.0).unwrap();
        let d = Density::gaussian(&g, 1.0, 0.5);
        let e = coulomb_bilinear(&d, &d).unwrap();
        assert!((e - 2.0 / PI.sqrt()).abs() < 1e-9, "{e}");
    }

    #[test]
    fn potential_of_point_like_charge_is_coulombic() {
        let g = Grid::new(32, 16.0, 100.0).unwrap();
        let d = Density::gaussian(&g, 1.0, 0.6);
        let v = d.potential();
        // Outside the charge the potential is 1/r until the truncation radius.
        let i = g.join([8, 0, 0]);
        let r = g.position(i)[0];
        assert!((v[i] - 1.0 / r).abs() < 1e-6, "{} vs {}", v[i], 1.0 / r);
    }
}
