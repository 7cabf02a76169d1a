//! Pointwise coefficients of the linearised operator and the quadratic source.

use rayon::prelude::*;

use super::Discretization;
use crate::bgflow::ExtendedBackground;
use crate::error::{Error, Result};

/// Velocity perturbation `(v1, v2, v3)` on the duct, each `[node][cross point]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub v: [Vec<Vec<f64>>; 3],
}

impl Velocity {
    pub fn zeros(nodes: usize, npts: usize) -> Self {
        let z = vec![vec![0.0; npts]; nodes];
        Velocity { v: [z.clone(), z.clone(), z] }
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().flatten().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// The force-potential perturbation `eps Phi0` and its gradient on the duct.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPotential {
    pub phi: Vec<Vec<f64>>,
    pub grad: [Vec<Vec<f64>>; 3],
}

impl ScaledPotential {
    pub fn zeros(nodes: usize, npts: usize) -> Self {
        let z = vec![vec![0.0; npts]; nodes];
        ScaledPotential { phi: z.clone(), grad: [z.clone(), z.clone(), z] }
    }
}

/// Deviations from the background coefficients, each `[node][cross point]`
/// on the duct, ordered `k11 - kbar11, k12, k13, k22 - 1, k23, k33 - 1`.
#[derive(Debug, Clone)]
pub struct CoefficientFields {
    pub dk: [Vec<Vec<f64>>; 6],
}

/// Index of `k_ij` inside [`CoefficientFields::dk`].
pub fn slot(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (1, 1) => 0,
        (1, 2) => 1,
        (1, 3) => 2,
        (2, 2) => 3,
        (2, 3) => 4,
        (3, 3) => 5,
        _ => panic!("no coefficient k{i}{j}"),
    }
}

#[derive(Debug, Clone)]
pub struct MixedCoefficients {
    pub ext: ExtendedBackground,
    /// `None` when the coefficients are exactly the background ones.
    pub fields: Option<CoefficientFields>,
    /// Smallest eigenvalue of the transverse block over the duct.
    pub ellipticity_margin: f64,
    /// Largest `|n2 k12 + n3 k13|` over wall nodes.
    pub wall_residual: f64,
    /// `sup |k11 - kbar11|`.
    pub sup_dev: f64,
}

impl MixedCoefficients {
    pub fn background(ext: &ExtendedBackground) -> Self {
        MixedCoefficients { ext: ext.clone(), fields: None, ellipticity_margin: 1.0, wall_residual: 0.0, sup_dev: 0.0 }
    }

    /// Full coefficients `[k11, k12, k13, k22, k23, k33]` at duct node `i`, cross point `p`.
    pub fn k_at(&self, i: usize, p: usize) -> [f64; 6] {
        let mut k = [self.ext.bg.pts[i].k11.value(), 0.0, 0.0, 1.0, 0.0, 1.0];
        if let Some(f) = &self.fields {
            for (s, d) in k.iter_mut().zip(&f.dk) {
                *s += d[i][p];
            }
        }
        k
    }

    /// Background first-order coefficient at duct node `i`.
    pub fn k1(&self, i: usize) -> f64 {
        self.ext.bg.pts[i].k1.value()
    }

    /// `sum k_ij d_ij psi + kbar1 d1 psi` at every duct grid point.
    pub fn apply(&self, disc: &Discretization, psi: &crate::xsection::SpectralField) -> Vec<Vec<f64>> {
        let h = hessian(disc, psi);
        let d1 = disc.values(psi, 1, 0);
        (0..disc.omega_nodes())
            .into_par_iter()
            .map(|i| {
                (0..disc.cs.npts())
                    .map(|p| {
                        let k = self.k_at(i, p);
                        k[0] * h[0][i][p]
                            + 2.0 * (k[1] * h[1][i][p] + k[2] * h[2][i][p] + k[4] * h[4][i][p])
                            + k[3] * h[3][i][p]
                            + k[5] * h[5][i][p]
                            + self.k1(i) * d1[i][p]
                    })
                    .collect()
            })
            .collect()
    }
}

/// Second derivatives `[d11, d12, d13, d22, d23, d33]` of a duct field on the grid.
pub fn hessian(disc: &Discretization, f: &crate::xsection::SpectralField) -> [Vec<Vec<f64>>; 6] {
    [
        disc.values(f, 2, 0),
        disc.values(f, 1, 1),
        disc.values(f, 1, 2),
        disc.values(f, 0, 3),
        disc.values(f, 0, 4),
        disc.values(f, 0, 5),
    ]
}

/// Coefficients of the linearised operator at a velocity perturbation.
pub fn assemble_coefficients(ext: &ExtendedBackground, disc: &Discretization, vel: &Velocity, phi: &ScaledPotential) -> Result<MixedCoefficients> {
    let gamma = ext.bg.gas.gamma;
    let nodes = disc.omega_nodes();
    let np = disc.cs.npts();
    if vel.v.iter().any(|c| c.len() != nodes || c.iter().any(|r| r.len() != np)) {
        return Err(Error::Dimension("velocity field does not match the duct grid".into()));
    }
    let rows: Vec<[Vec<f64>; 6]> = (0..nodes)
        .into_par_iter()
        .map(|i| {
            let bp = &ext.bg.pts[i];
            let q = 1.0 / bp.c2.value();
            let u = bp.u.value();
            let mut out: [Vec<f64>; 6] = Default::default();
            for o in out.iter_mut() {
                o.reserve(np);
            }
            for p in 0..np {
                let (v1, v2, v3) = (vel.v[0][i][p], vel.v[1][i][p], vel.v[2][i][p]);
                let ep = phi.phi[i][p];
                let d11 = -q * ((gamma + 1.0) * u * v1 - (gamma - 1.0) * ep + 0.5 * (gamma + 1.0) * v1 * v1 + 0.5 * (gamma - 1.0) * (v2 * v2 + v3 * v3));
                let b = (gamma - 1.0) * q * (ep - u * v1 - 0.5 * (v1 * v1 + v2 * v2 + v3 * v3));
                out[0].push(d11);
                out[1].push(-q * (u + v1) * v2);
                out[2].push(-q * (u + v1) * v3);
                out[3].push(b - q * v2 * v2);
                out[4].push(-q * v2 * v3);
                out[5].push(b - q * v3 * v3);
            }
            out
        })
        .collect();
    let mut dk: [Vec<Vec<f64>>; 6] = Default::default();
    for row in rows {
        for (d, r) in dk.iter_mut().zip(row) {
            d.push(r);
        }
    }
    let mut margin = f64::INFINITY;
    let mut sup_dev = 0.0f64;
    for i in 0..nodes {
        for p in 0..np {
            let (a, b, c) = (1.0 + dk[3][i][p], dk[4][i][p], 1.0 + dk[5][i][p]);
            let lmin = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
            margin = margin.min(lmin);
            sup_dev = sup_dev.max(dk[0][i][p].abs());
        }
    }
    if margin < 0.5 {
        return Err(Error::StateTooLarge(format!("transverse block lost ellipticity: smallest eigenvalue {margin} < 1/2")));
    }
    let mut wall = 0.0f64;
    for &(p, _) in &disc.cs.boundary {
        for n in disc.cs.edge_normals(p) {
            for i in 0..nodes {
                wall = wall.max((n[0] * dk[1][i][p] + n[1] * dk[2][i][p]).abs());
            }
        }
    }
    Ok(MixedCoefficients { ext: ext.clone(), fields: Some(CoefficientFields { dk }), ellipticity_margin: margin, wall_residual: wall, sup_dev })
}

/// Quadratic source `F0(v)` of the reformulated potential equation.
pub fn source_f0(ext: &ExtendedBackground, vel: &Velocity, phi: &ScaledPotential) -> Vec<Vec<f64>> {
    let gamma = ext.bg.gas.gamma;
    let nodes = vel.v[0].len();
    (0..nodes)
        .into_par_iter()
        .map(|i| {
            let bp = &ext.bg.pts[i];
            let q = 1.0 / bp.c2.value();
            let u = bp.u.value();
            let du = bp.u.deriv(1);
            (0..vel.v[0][i].len())
                .map(|p| {
                    let (v1, v2, v3) = (vel.v[0][i][p], vel.v[1][i][p], vel.v[2][i][p]);
                    let quad = -(gamma - 1.0) * phi.phi[i][p] + 0.5 * (gamma + 1.0) * v1 * v1 + 0.5 * (gamma - 1.0) * (v2 * v2 + v3 * v3);
                    let work = (u + v1) * phi.grad[0][i][p] + v2 * phi.grad[1][i][p] + v3 * phi.grad[2][i][p];
                    du * q * quad - q * work
                })
                .collect()
        })
        .collect()
}
