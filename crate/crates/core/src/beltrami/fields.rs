//! Velocity perturbations stored mode by mode, each component in the
//! cross-section family its wall conditions select.
//!
//! `v1` is expanded in cosines (zero normal slope), `v2` in `sin x2 cos x3`,
//! `v3` in `cos x2 sin x3` (zero normal component). The Dirichlet family
//! carries `Pi` and `u1`, the vector family `(u2, u3)`. All families share
//! the wavenumber pairs of the duct's Neumann basis, so derivatives of a
//! field stay inside the next family exactly.

use rayon::prelude::*;

use crate::duct::Duct;
use crate::error::{Error, Result};
use crate::fd::Stencils;
use crate::mixed::{sobolev_norm_with, ScaledPotential, Velocity, STENCIL};
use crate::xsection::{vector_basis_from_pairs, BasisKind, ScalarEigenBasis, SpectralField, VectorEigenBasis};

#[derive(Debug, Clone)]
pub struct Families {
    pub cc: ScalarEigenBasis,
    pub sc: ScalarEigenBasis,
    pub cs: ScalarEigenBasis,
    pub ss: ScalarEigenBasis,
    pub vec: VectorEigenBasis,
    /// Nodes of the upstream third `x1 <= L0/3` of the duct.
    pub third: usize,
}

impl Families {
    pub fn new(duct: &Duct) -> Result<Self> {
        let disc = &duct.disc;
        let pairs = &disc.basis.modes;
        let grid = &disc.grid;
        let third = ((grid.l0 / 3.0 - grid.l0) / grid.h + 1e-9).floor() as usize + 1;
        Ok(Families {
            cc: disc.basis.clone(),
            sc: ScalarEigenBasis::from_pairs(&disc.cs, BasisKind::SinCos, pairs)?,
            cs: ScalarEigenBasis::from_pairs(&disc.cs, BasisKind::CosSin, pairs)?,
            ss: ScalarEigenBasis::from_pairs(&disc.cs, BasisKind::Dirichlet, pairs)?,
            vec: vector_basis_from_pairs(&disc.cs, pairs)?,
            third,
        })
    }

    /// Family of velocity component `j`.
    pub fn component(&self, j: usize) -> &ScalarEigenBasis {
        [&self.cc, &self.sc, &self.cs][j]
    }
}

/// Project grid values on the duct onto a scalar family.
pub fn project(duct: &Duct, basis: &ScalarEigenBasis, field: &[Vec<f64>]) -> Result<SpectralField> {
    let rows: Vec<Result<Vec<f64>>> = field.par_iter().map(|s| basis.analyze_slice(&duct.disc.cs, s)).collect();
    let mut out = SpectralField::zeros(basis.len(), field.len());
    for (i, r) in rows.into_iter().enumerate() {
        for (m, v) in r?.into_iter().enumerate() {
            out.coeffs[m][i] = v;
        }
    }
    Ok(out)
}

/// Project a tangential field onto the vector family.
pub fn project_vector(duct: &Duct, basis: &VectorEigenBasis, f2: &[Vec<f64>], f3: &[Vec<f64>]) -> Result<SpectralField> {
    let rows: Vec<Result<Vec<f64>>> = f2.par_iter().zip(f3).map(|(a, b)| basis.analyze_slice(&duct.disc.cs, a, b)).collect();
    let mut out = SpectralField::zeros(basis.len(), f2.len());
    for (i, r) in rows.into_iter().enumerate() {
        for (m, v) in r?.into_iter().enumerate() {
            out.coeffs[m][i] = v;
        }
    }
    Ok(out)
}

/// Axial derivative of order `k` of a field on the duct.
pub fn d1(duct: &Duct, f: &SpectralField, k: usize) -> SpectralField {
    if k == 0 {
        return f.clone();
    }
    SpectralField { coeffs: f.coeffs.iter().map(|c| duct.disc.st_omega.apply(k, c)).collect() }
}

/// Grid values of `d1^k` and cross slot `d` of a scalar-family field.
pub fn values(duct: &Duct, basis: &ScalarEigenBasis, f: &SpectralField, k: usize, d: usize) -> Vec<Vec<f64>> {
    let g = d1(duct, f, k);
    (0..g.nodes()).into_par_iter().map(|i| basis.synthesize_slice(&g.slice(i), d)).collect()
}

/// Grid values of component `c` (0 -> x2, 1 -> x3) of a vector-family field.
pub fn vector_values(duct: &Duct, basis: &VectorEigenBasis, f: &SpectralField, k: usize, c: usize, d: usize) -> Vec<Vec<f64>> {
    let g = d1(duct, f, k);
    (0..g.nodes()).into_par_iter().map(|i| basis.synthesize_slice(&g.slice(i), c, d)).collect()
}

/// Density from Bernoulli for the perturbation `vel` of the background.
pub fn density(duct: &Duct, vel: &Velocity, phi: &ScaledPotential) -> Result<Vec<Vec<f64>>> {
    let gas = &duct.gas;
    let np = duct.disc.cs.npts();
    (0..vel.v[0].len())
        .map(|i| {
            let bp = &duct.ext.bg.pts[i];
            (0..np)
                .map(|p| {
                    let u1 = bp.u.value() + vel.v[0][i][p];
                    let q2 = u1 * u1 + vel.v[1][i][p].powi(2) + vel.v[2][i][p].powi(2);
                    let budget = gas.b0 + bp.phi.value() + phi.phi[i][p] - 0.5 * q2;
                    if !(budget > 0.0) || !(u1 > 0.0) {
                        return Err(Error::Stagnation(format!("axial speed {u1} or enthalpy budget {budget} not positive at node ({i}, {p})")));
                    }
                    Ok(gas.density_from_budget(budget))
                })
                .collect()
        })
        .collect()
}

/// A velocity perturbation in the component families.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalVelocity {
    pub c: [SpectralField; 3],
}

impl ModalVelocity {
    pub fn zeros(fam: &Families, nodes: usize) -> Self {
        ModalVelocity { c: [0, 1, 2].map(|j| SpectralField::zeros(fam.component(j).len(), nodes)) }
    }

    pub fn nodes(&self) -> usize {
        self.c[0].nodes()
    }

    pub fn from_grid(duct: &Duct, fam: &Families, v: &[Vec<Vec<f64>>; 3]) -> Result<Self> {
        Ok(ModalVelocity { c: [project(duct, &fam.cc, &v[0])?, project(duct, &fam.sc, &v[1])?, project(duct, &fam.cs, &v[2])?] })
    }

    /// `grad psi` of a cosine-family scalar.
    pub fn gradient(duct: &Duct, fam: &Families, psi: &SpectralField) -> Result<Self> {
        let g2 = values(duct, &fam.cc, psi, 0, 1);
        let g3 = values(duct, &fam.cc, psi, 0, 2);
        Ok(ModalVelocity { c: [d1(duct, psi, 1), project(duct, &fam.sc, &g2)?, project(duct, &fam.cs, &g3)?] })
    }

    pub fn grid(&self, duct: &Duct, fam: &Families) -> Velocity {
        Velocity { v: [0, 1, 2].map(|j| values(duct, fam.component(j), &self.c[j], 0, 0)) }
    }

    /// Grid values of `d_i v_j`, with `i` and `j` counted from 0.
    pub fn deriv(&self, duct: &Duct, fam: &Families, i: usize, j: usize) -> Vec<Vec<f64>> {
        let (k, d) = [(1, 0), (0, 1), (0, 2)][i];
        values(duct, fam.component(j), &self.c[j], k, d)
    }

    pub fn axpy(&mut self, s: f64, other: &ModalVelocity) {
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            a.axpy(s, b);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }

    /// Sum of the component `H^s` norms on the duct, with axial derivatives
    /// taken on every `stride`-th node.
    pub fn norm(&self, duct: &Duct, fam: &Families, s: usize, stride: usize) -> f64 {
        self.norm_on(duct, fam, s, stride, self.nodes())
    }

    /// `H^s` norm on the upstream third `x1 <= L0/3`.
    pub fn norm_third(&self, duct: &Duct, fam: &Families, s: usize, stride: usize) -> f64 {
        self.norm_on(duct, fam, s, stride, fam.third)
    }

    fn norm_on(&self, duct: &Duct, fam: &Families, s: usize, stride: usize, nodes: usize) -> f64 {
        let stride = stride.max(1);
        let h = duct.disc.grid.h * stride as f64;
        let n = (nodes - 1) / stride + 1;
        let st = Stencils::new(n, h, STENCIL, s.max(1));
        (0..3)
            .map(|j| {
                let f = SpectralField { coeffs: self.c[j].coeffs.iter().map(|c| c[..nodes].iter().step_by(stride).copied().collect()).collect() };
                sobolev_norm_with(&st, &fam.component(j).eigenvalues, h, &f, s).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Grid values of `curl v`.
    pub fn curl(&self, duct: &Duct, fam: &Families) -> [Vec<Vec<f64>>; 3] {
        let d = |i, j| self.deriv(duct, fam, i, j);
        let sub = |a: Vec<Vec<f64>>, b: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            a.into_iter().zip(b).map(|(x, y)| x.into_iter().zip(y).map(|(p, q)| p - q).collect()).collect()
        };
        [sub(d(1, 2), d(2, 1)), sub(d(2, 0), d(0, 2)), sub(d(0, 1), d(1, 0))]
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::duct::DuctConfig;

    pub(crate) fn small_duct() -> Duct {
        Duct::build(&DuctConfig { n1: 840, modes: 10, n2: 14, n3: 14, ..Default::default() }).unwrap()
    }

    #[test]
    fn gradient_fields_are_curl_free() {
        let duct = small_duct();
        let fam = Families::new(&duct).unwrap();
        let x = duct.disc.grid.omega_x();
        let mut psi = SpectralField::zeros(fam.cc.len(), x.len());
        for (m, c) in psi.coeffs.iter_mut().enumerate() {
            for (i, v) in c.iter_mut().enumerate() {
                *v = (x[i] * (m + 1) as f64).sin() / (m + 1) as f64;
            }
        }
        let g = ModalVelocity::gradient(&duct, &fam, &psi).unwrap();
        let w = g.curl(&duct, &fam);
        let worst = w.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-9, "{worst}");
        // and the grid round trip is exact
        let back = ModalVelocity::from_grid(&duct, &fam, &g.grid(&duct, &fam).v).unwrap();
        let mut d = back.clone();
        d.axpy(-1.0, &g);
        assert!(d.max_abs() < 1e-12);
    }

    #[test]
    fn upstream_third_ends_at_its_node() {
        let duct = small_duct();
        let fam = Families::new(&duct).unwrap();
        let g = &duct.disc.grid;
        let last = g.l0 + (fam.third - 1) as f64 * g.h;
        assert!(last <= g.l0 / 3.0 + 1e-12 && last + g.h > g.l0 / 3.0);
    }

    #[test]
    fn point_values_match_the_table() {
        let duct = small_duct();
        let fam = Families::new(&duct).unwrap();
        let c: Vec<f64> = (0..fam.sc.len()).map(|k| (k as f64 * 0.7).cos()).collect();
        for (x2, x3) in [(0.3, 2.9), (1.7, 0.01), (3.0, 1.1)] {
            let want = fam.sc.eval_sum(&c, x2, x3)[0];
            assert!((fam.sc.eval_value(&c, x2, x3) - want).abs() < 1e-13);
        }
    }
}
