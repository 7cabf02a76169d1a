//! Linear mixed elliptic–hyperbolic solver on the duct and its extension.
//!
//! Unknowns are expanded in the Neumann eigenbasis of the cross-section, so
//! the problem becomes a coupled system of axial ODEs for the mode
//! coefficients. The exit region `(L1, L2]` is added by reflecting the data,
//! a small third-order term `sigma d^3/dx1^3` regularises the degenerate
//! sonic line, and the `sigma -> 0` limit is taken by extrapolation.

pub mod coeffs;
pub mod energy;
pub mod extension;
pub mod galerkin;
pub mod manufactured;
pub mod modebvp;

pub use coeffs::{assemble_coefficients, hessian, source_f0, MixedCoefficients, ScaledPotential, Velocity};
pub use energy::{energy_diagnostics, EnergyReport};
pub use extension::{extend_fn, extension_coefficients, Extender, EXT_COEFFS};
pub use galerkin::{assemble_system, default_ladder, galerkin_solve, layer_ceiling, sigma_floor, solve_linear_mixed, GalerkinSystem, LadderReport, EXTRAPOLATION_POINTS};
pub use modebvp::{mode_bvp_solve, Bc};

use rayon::prelude::*;

use crate::error::Result;
use crate::fd::Stencils;
use crate::grid::AxialGrid;
use crate::xsection::{self, CrossSection, ScalarEigenBasis, SpectralField};

/// Axial stencil width used throughout the solvers.
pub const STENCIL: usize = 7;

/// Grid, cross-section basis and axial stencils shared by all solves.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: AxialGrid,
    pub cs: CrossSection,
    pub basis: ScalarEigenBasis,
    /// Stencils on the whole grid `[L0, L2]`.
    pub st: Stencils,
    /// Stencils on the physical duct `[L0, L1]`.
    pub st_omega: Stencils,
    pub ext: Extender,
}

impl Discretization {
    pub fn new(grid: AxialGrid, cs: CrossSection, modes: usize) -> Result<Self> {
        let basis = xsection::neumann_basis(&cs, modes)?;
        Self::with_basis(grid, cs, basis)
    }

    pub fn with_basis(grid: AxialGrid, cs: CrossSection, basis: ScalarEigenBasis) -> Result<Self> {
        let st = Stencils::new(grid.nodes(), grid.h, STENCIL, 3);
        let st_omega = Stencils::new(grid.omega_nodes(), grid.h, STENCIL, 4);
        let ext = Extender::new(&grid)?;
        Ok(Discretization { grid, cs, basis, st, st_omega, ext })
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    pub fn omega_nodes(&self) -> usize {
        self.grid.omega_nodes()
    }

    /// Axial derivative of order `k` of a field on the physical duct.
    pub fn d1(&self, f: &SpectralField, k: usize) -> SpectralField {
        SpectralField { coeffs: f.coeffs.iter().map(|c| self.st_omega.apply(k, c)).collect() }
    }

    /// Grid values `[i][p]` of `d1^k` combined with cross-section slot `d`
    /// (0 value, 1 d2, 2 d3, 3 d22, 4 d23, 5 d33).
    pub fn values(&self, f: &SpectralField, k: usize, d: usize) -> Vec<Vec<f64>> {
        let g = if k == 0 { f.clone() } else { self.d1(f, k) };
        (0..g.nodes()).into_par_iter().map(|i| self.basis.synthesize_slice(&g.slice(i), d)).collect()
    }

    /// Project grid values on the physical duct onto the modes.
    pub fn project(&self, field: &[Vec<f64>]) -> Result<SpectralField> {
        let rows: Vec<Result<Vec<f64>>> = field.par_iter().map(|s| self.basis.analyze_slice(&self.cs, s)).collect();
        let mut out = SpectralField::zeros(self.modes(), field.len());
        for (i, r) in rows.into_iter().enumerate() {
            for (m, v) in r?.into_iter().enumerate() {
                out.coeffs[m][i] = v;
            }
        }
        Ok(out)
    }

    /// Extend each mode coefficient from the duct to the whole grid.
    pub fn extend(&self, f: &SpectralField) -> Result<SpectralField> {
        Ok(SpectralField { coeffs: f.coeffs.iter().map(|c| self.ext.apply(c)).collect::<Result<_>>()? })
    }

    /// Restrict a whole-grid field to the physical duct.
    pub fn restrict(&self, f: &SpectralField) -> SpectralField {
        let n = self.omega_nodes();
        SpectralField { coeffs: f.coeffs.iter().map(|c| c[..n].to_vec()).collect() }
    }

    /// Discrete `H^s` norm on the duct: sum over modes and axial derivative
    /// orders `k <= s` of `(1 + lambda)^(s-k) |A^(k)|^2`, integrated in `x1`.
    pub fn sobolev_norm(&self, f: &SpectralField, s: usize) -> f64 {
        sobolev_norm_with(&self.st_omega, &self.basis.eigenvalues, self.grid.h, f, s)
    }
}

/// [`Discretization::sobolev_norm`] for an arbitrary eigenvalue list.
pub fn sobolev_norm_with(st: &Stencils, eig: &[f64], h: f64, f: &SpectralField, s: usize) -> f64 {
    let n = f.nodes();
    let w = crate::fd::quadrature_weights(n, h);
    let mut total = 0.0;
    for (c, lam) in f.coeffs.iter().zip(eig) {
        for k in 0..=s {
            let dk = if k == 0 { c.clone() } else { st.apply(k, c) };
            let wt = (1.0 + lam).powi((s - k) as i32);
            total += wt * dk.iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>();
        }
    }
    total.sqrt()
}
