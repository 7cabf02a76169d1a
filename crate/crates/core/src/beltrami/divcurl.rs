//! The auxiliary potential `Pi`, the vector potential `u` with
//! `curl curl u = F`, and the harmonic correction fixing the entrance data.

use rayon::prelude::*;

use super::fields::{d1, project, project_vector, values, vector_values, Families, ModalVelocity};
use crate::duct::Duct;
use crate::error::{Error, Result};
use crate::fd::Stencils;
use crate::mixed::modebvp::{decaying_mode, decaying_mode_d, mode_bvp_solve_with};
use crate::mixed::Bc;
use crate::xsection::SpectralField;

/// Relative size of `kappa`, `d1 kappa`, `d1^2 kappa` on the wall above which
/// the source of the `Pi` problem is rejected.
pub const COMPAT_TOL: f64 = 1e-8;
/// Relative divergence and wall-trace residual accepted in a curl source.
pub const SOURCE_TOL: f64 = 1e-6;
/// Relative rotational part accepted in the entrance mismatch.
pub const STREAM_TOL: f64 = 1e-6;

fn max_abs(f: &[Vec<f64>]) -> f64 {
    f.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

fn combine(a: &[Vec<f64>], b: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + s * q).collect()).collect()
}

/// Solve `P'' - alpha P = rhs` per mode with zero slope at both ends.
pub fn neumann_modes(st: &Stencils, alphas: &[f64], rhs: &SpectralField) -> Result<SpectralField> {
    let n = rhs.nodes();
    let (k, dk) = (vec![1.0; n], vec![0.0; n]);
    let coeffs = rhs
        .coeffs
        .par_iter()
        .zip(alphas)
        .map(|(g, &a)| mode_bvp_solve_with(st, &k, &dk, a, g, Bc::Neumann(0.0), Bc::Neumann(0.0)))
        .collect::<Result<_>>()?;
    Ok(SpectralField { coeffs })
}

/// Largest of `|kappa|`, `|d1 kappa|`, `|d1^2 kappa|` on the wall, relative to `max |kappa|`.
pub fn wall_kappa_residual(duct: &Duct, kappa: &[Vec<f64>]) -> f64 {
    let scale = max_abs(kappa);
    if scale == 0.0 {
        return 0.0;
    }
    let st = &duct.disc.st_omega;
    let mut worst = 0.0f64;
    for &(p, _) in &duct.disc.cs.boundary {
        let line: Vec<f64> = kappa.iter().map(|r| r[p]).collect();
        let m = |v: Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        worst = worst.max(m(line.clone())).max(m(st.apply(1, &line)) * st.h).max(m(st.apply(2, &line)) * st.h * st.h);
    }
    worst / scale
}

#[derive(Debug, Clone)]
pub struct PiSolution {
    /// Coefficients in the Dirichlet family.
    pub pi: SpectralField,
    pub wall_compat: f64,
}

/// `Delta Pi = div f` with `d1 Pi = 0` at both ends and `Pi = 0` on the wall.
pub fn solve_pi(duct: &Duct, fam: &Families, kappa: &[Vec<f64>], f: &[Vec<Vec<f64>>; 3]) -> Result<PiSolution> {
    let wall_compat = wall_kappa_residual(duct, kappa);
    if wall_compat > COMPAT_TOL {
        return Err(Error::Compatibility(format!(
            "the vorticity ratio does not vanish to second order on the wall (relative {wall_compat:e}), so the source of the Pi problem is incompatible at the end circles"
        )));
    }
    let cs = &duct.disc.cs;
    let f1 = d1(duct, &project(duct, &fam.ss, &f[0])?, 1);
    // weak form: \int div f q_m = d1 f1_m - \int f' . grad' q_m
    let mut rhs = f1;
    for (m, row) in rhs.coeffs.iter_mut().enumerate() {
        let t = &fam.ss.table[m];
        for (i, r) in row.iter_mut().enumerate() {
            *r -= (0..cs.npts()).map(|p| cs.weights[p] * (f[1][i][p] * t[p][1] + f[2][i][p] * t[p][2])).sum::<f64>();
        }
    }
    Ok(PiSolution { pi: neumann_modes(&duct.disc.st_omega, &fam.ss.eigenvalues, &rhs)?, wall_compat })
}

/// A curl source: `F1` in the Dirichlet family, `(F2, F3)` in the vector family.
#[derive(Debug, Clone)]
pub struct CurlSource {
    pub f1: SpectralField,
    pub fv: SpectralField,
}

impl CurlSource {
    pub fn from_grid(duct: &Duct, fam: &Families, f: &[Vec<Vec<f64>>; 3]) -> Result<Self> {
        Ok(CurlSource { f1: project(duct, &fam.ss, &f[0])?, fv: project_vector(duct, &fam.vec, &f[1], &f[2])? })
    }

    /// `f - grad Pi`.
    pub fn corrected(duct: &Duct, fam: &Families, f: &[Vec<Vec<f64>>; 3], pi: &SpectralField) -> Result<Self> {
        let mut f1 = project(duct, &fam.ss, &f[0])?;
        f1.axpy(-1.0, &d1(duct, pi, 1));
        let g2 = combine(&f[1], &values(duct, &fam.ss, pi, 0, 1), -1.0);
        let g3 = combine(&f[2], &values(duct, &fam.ss, pi, 0, 2), -1.0);
        Ok(CurlSource { f1, fv: project_vector(duct, &fam.vec, &g2, &g3)? })
    }

    pub fn grid(&self, duct: &Duct, fam: &Families) -> [Vec<Vec<f64>>; 3] {
        [values(duct, &fam.ss, &self.f1, 0, 0), vector_values(duct, &fam.vec, &self.fv, 0, 0, 0), vector_values(duct, &fam.vec, &self.fv, 0, 1, 0)]
    }

    /// `max |div F|` relative to the larger of `max |F|` and the largest sum
    /// of its three terms.
    pub fn divergence_residual(&self, duct: &Duct, fam: &Families) -> f64 {
        let t = [values(duct, &fam.ss, &self.f1, 1, 0), vector_values(duct, &fam.vec, &self.fv, 0, 0, 1), vector_values(duct, &fam.vec, &self.fv, 0, 1, 2)];
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..t[0].len() {
            for p in 0..t[0][i].len() {
                worst = worst.max((t[0][i][p] + t[1][i][p] + t[2][i][p]).abs());
                scale = scale.max(t[0][i][p].abs() + t[1][i][p].abs() + t[2][i][p].abs());
            }
        }
        let scale = self.grid(duct, fam).iter().map(|c| max_abs(c)).fold(scale, f64::max);
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// `|d1 F1|` and `|n2 F3 - n3 F2|` on the boundaries of the end sections, relative to `max |F|`.
    pub fn end_compatibility(&self, duct: &Duct, fam: &Families) -> f64 {
        let g = self.grid(duct, fam);
        let scale = g.iter().map(|c| max_abs(c)).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let df1 = values(duct, &fam.ss, &self.f1, 1, 0);
        let n = df1.len();
        let mut worst = 0.0f64;
        for i in [0, n - 1] {
            for &(p, _) in &duct.disc.cs.boundary {
                worst = worst.max(df1[i][p].abs());
                for nr in duct.disc.cs.edge_normals(p) {
                    worst = worst.max((nr[0] * g[2][i][p] - nr[1] * g[1][i][p]).abs());
                }
            }
        }
        worst / scale
    }
}

/// `u` with `-Delta u = F`, `div u = 0` and `u x n = 0` on the boundary.
#[derive(Debug, Clone)]
pub struct VectorPotential {
    /// Dirichlet family.
    pub u1: SpectralField,
    /// Vector family.
    pub uv: SpectralField,
}

impl VectorPotential {
    /// `curl u` in the velocity families.
    pub fn curl(&self, duct: &Duct, fam: &Families) -> Result<ModalVelocity> {
        let vv = |k, c, d| vector_values(duct, &fam.vec, &self.uv, k, c, d);
        let ss = |d| values(duct, &fam.ss, &self.u1, 0, d);
        Ok(ModalVelocity {
            c: [
                project(duct, &fam.cc, &combine(&vv(0, 1, 1), &vv(0, 0, 2), -1.0))?,
                project(duct, &fam.sc, &combine(&ss(2), &vv(1, 1, 0), -1.0))?,
                project(duct, &fam.cs, &combine(&vv(1, 0, 0), &ss(1), -1.0))?,
            ],
        })
    }

    pub fn divergence(&self, duct: &Duct, fam: &Families) -> Vec<Vec<f64>> {
        let a = values(duct, &fam.ss, &self.u1, 1, 0);
        let b = combine(&vector_values(duct, &fam.vec, &self.uv, 0, 0, 1), &vector_values(duct, &fam.vec, &self.uv, 0, 1, 2), 1.0);
        combine(&a, &b, 1.0)
    }
}

/// Solve for the vector potential of a divergence-free source, so that
/// `curl curl u = grad div u - Delta u = F`.
pub fn vector_potential(duct: &Duct, fam: &Families, src: &CurlSource) -> Result<VectorPotential> {
    let div = src.divergence_residual(duct, fam);
    if div > SOURCE_TOL {
        return Err(Error::InvalidSource(format!("curl source has relative divergence {div:e}")));
    }
    let compat = src.end_compatibility(duct, fam);
    if compat > SOURCE_TOL {
        return Err(Error::InvalidSource(format!("curl source violates the end-circle conditions by {compat:e}")));
    }
    let st = &duct.disc.st_omega;
    let n = src.f1.nodes();
    let mut neg = src.f1.clone();
    neg.scale(-1.0);
    let u1 = neumann_modes(st, &fam.ss.eigenvalues, &neg)?;
    let (k, dk) = (vec![1.0; n], vec![0.0; n]);
    let uv = src
        .fv
        .coeffs
        .par_iter()
        .zip(&fam.vec.eigenvalues)
        .map(|(g, &b)| {
            let g: Vec<f64> = g.iter().map(|v| -v).collect();
            mode_bvp_solve_with(st, &k, &dk, b, &g, Bc::Dirichlet(0.0), Bc::Dirichlet(0.0))
        })
        .collect::<Result<_>>()?;
    Ok(VectorPotential { u1, uv: SpectralField { coeffs: uv } })
}

#[derive(Debug, Clone)]
pub struct DivCurl {
    pub u: VectorPotential,
    pub vtilde: ModalVelocity,
    /// Harmonic potential, cosine-family coefficients `s_m(x1)`.
    pub phi: SpectralField,
    pub grad_phi: ModalVelocity,
    pub vdot: ModalVelocity,
    /// Rotational part of the entrance mismatch, relative to the data.
    pub stream_mismatch: f64,
}

/// `div v = 0`, `curl v = F`, `v' = g` at the entrance, `v1 = 0` at the
/// exit and `v . n = 0` on the wall.
pub fn solve_divcurl(duct: &Duct, fam: &Families, src: &CurlSource, g: [&[f64]; 2]) -> Result<DivCurl> {
    let cs = &duct.disc.cs;
    let grid = &duct.disc.grid;
    let u = vector_potential(duct, fam, src)?;
    let vtilde = u.curl(duct, fam)?;
    let t2 = fam.sc.synthesize_slice(&vtilde.c[1].slice(0), 0);
    let t3 = fam.cs.synthesize_slice(&vtilde.c[2].slice(0), 0);
    let r2: Vec<f64> = g[0].iter().zip(&t2).map(|(a, b)| a - b).collect();
    let r3: Vec<f64> = g[1].iter().zip(&t3).map(|(a, b)| a - b).collect();
    // stream function of the remaining entrance data, zero mean
    let r: Vec<f64> = (0..fam.cc.len())
        .map(|m| {
            let lam = fam.cc.eigenvalues[m];
            if lam == 0.0 {
                return 0.0;
            }
            let t = &fam.cc.table[m];
            (0..cs.npts()).map(|p| cs.weights[p] * (r2[p] * t[p][1] + r3[p] * t[p][2])).sum::<f64>() / lam
        })
        .collect();
    let (h2, h3) = (fam.cc.synthesize_slice(&r, 1), fam.cc.synthesize_slice(&r, 2));
    let scale = [g[0], g[1], &t2, &t3].iter().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let miss = (0..cs.npts()).map(|p| (h2[p] - r2[p]).abs().max((h3[p] - r3[p]).abs())).fold(0.0, f64::max);
    let stream_mismatch = if scale == 0.0 { 0.0 } else { miss / scale };
    if stream_mismatch > STREAM_TOL {
        return Err(Error::DataInconsistency(format!(
            "entrance data minus the div-curl trace is not a gradient on the section (relative rotational part {stream_mismatch:e})"
        )));
    }
    let x = grid.omega_x();
    let mode = |f: fn(f64, f64, f64, f64, f64) -> f64| SpectralField {
        coeffs: r.iter().zip(&fam.cc.eigenvalues).map(|(&rm, &lam)| x.iter().map(|&xi| f(rm, lam, grid.l0, grid.l1, xi)).collect()).collect(),
    };
    let phi = mode(decaying_mode);
    let grad_phi = ModalVelocity {
        c: [mode(decaying_mode_d), project(duct, &fam.sc, &values(duct, &fam.cc, &phi, 0, 1))?, project(duct, &fam.cs, &values(duct, &fam.cc, &phi, 0, 2))?],
    };
    let mut vdot = vtilde.clone();
    vdot.axpy(1.0, &grad_phi);
    Ok(DivCurl { u, vtilde, phi, grad_phi, vdot, stream_mismatch })
}
