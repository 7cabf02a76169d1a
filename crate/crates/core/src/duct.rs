//! A fully assembled duct problem: gas, force, background, extension and
//! the discretisation every solver shares.

use serde::{Deserialize, Serialize};

use crate::bgflow::{self, Admissibility, BackgroundFlow, ExtendedBackground, ExternalForce, ForceShape, GasConstants};
use crate::error::{Error, Result};
use crate::grid::AxialGrid;
use crate::mixed::Discretization;
use crate::xsection;

/// Geometry, gas and resolution of a duct problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuctConfig {
    pub gamma: f64,
    pub rho0: f64,
    pub u0: f64,
    pub l0: f64,
    pub l1: f64,
    /// Axial intervals on `[L0, 2 L1]`.
    pub n1: usize,
    /// Cross-section side lengths.
    pub a: f64,
    pub b: f64,
    /// Cross-section grid nodes per side.
    pub n2: usize,
    pub n3: usize,
    /// Number of cross-section modes.
    pub modes: usize,
    /// Keep only modes symmetric about both mid-lines.
    pub symmetric: bool,
    pub force: ForceShape,
}

impl Default for DuctConfig {
    fn default() -> Self {
        DuctConfig {
            gamma: 2.0,
            rho0: 1.0,
            u0: 0.5,
            l0: -1.0,
            l1: 0.5,
            n1: 1680,
            a: std::f64::consts::PI,
            b: std::f64::consts::PI,
            n2: 16,
            n3: 16,
            modes: 16,
            symmetric: false,
            force: ForceShape::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Duct {
    pub config: DuctConfig,
    pub gas: GasConstants,
    pub force: ExternalForce,
    /// Background on the physical duct nodes.
    pub bg: BackgroundFlow,
    pub adm: Admissibility,
    /// Background and blended coefficients on the whole grid.
    pub ext: ExtendedBackground,
    pub disc: Discretization,
}

impl Duct {
    pub fn build(config: &DuctConfig) -> Result<Self> {
        if config.modes == 0 {
            return Err(Error::Config("modes must be positive".into()));
        }
        let gas = GasConstants::new(config.gamma, config.rho0, config.u0)?;
        let force = bgflow::make_admissible_force(&gas, config.l0, config.l1, &config.force)?;
        let grid = AxialGrid::new(config.l0, config.l1, config.n1)?;
        grid.check_extension_divisibility()?;
        let bg = bgflow::solve_background(&gas, &force, grid.omega_x())?;
        let adm = bgflow::verify_admissibility(&bg, &grid.x)?;
        let ext = bgflow::extend_background(&bg, &grid.x, adm.k0, adm.d0)?;
        let cs = xsection::build_rectangle(config.a, config.b, config.n2, config.n3)?;
        let basis = if config.symmetric {
            xsection::neumann_basis_symmetric(&cs, config.modes)?
        } else {
            xsection::neumann_basis(&cs, config.modes)?
        };
        let disc = Discretization::with_basis(grid, cs, basis)?;
        Ok(Duct { config: config.clone(), gas, force, bg, adm, ext, disc })
    }
}
