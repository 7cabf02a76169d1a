//! The vorticity ratio `kappa = curl v . (rho v) / |rho v|^2`, constant
//! along streamlines and fixed at the entrance by the tangential datum.

use rayon::prelude::*;

use super::data::TangentialDatum;
use super::fields::{density, Families, ModalVelocity};
use crate::bgflow::background_point;
use crate::duct::Duct;
use crate::error::{Error, Result};
use crate::fd::interp_uniform;
use crate::mixed::{ScaledPotential, Velocity};
use crate::xsection::{BasisKind, CrossSection, ScalarEigenBasis, SpectralField, Trig};

/// How far a traced point may leave the section, relative to its size,
/// before the transport is rejected.
pub const GEOMETRY_TOL: f64 = 1e-9;

/// `kappa` at the entrance: `eps curl' h / (rho u1)` with the density and
/// axial speed of the current velocity.
pub fn kappa_boundary(duct: &Duct, datum: &TangentialDatum, eps: f64, vel: &Velocity, phi: &ScaledPotential) -> Result<Vec<f64>> {
    let cs = &duct.disc.cs;
    let entrance = Velocity { v: [0, 1, 2].map(|j| vel.v[j][..1].to_vec()) };
    let phi0 = ScaledPotential { phi: phi.phi[..1].to_vec(), grad: [0, 1, 2].map(|j| phi.grad[j][..1].to_vec()) };
    let rho = density(duct, &entrance, &phi0)?;
    let ub = duct.ext.bg.pts[0].u.value();
    Ok((0..cs.npts())
        .map(|p| {
            let (x2, x3) = cs.point(p);
            eps * datum.jet(cs.a, cs.b, x2, x3).curl / (rho[0][p] * (ub + vel.v[0][0][p]))
        })
        .collect())
}

/// Mode coefficients and background speed at one axial position.
struct Level {
    ub: f64,
    c: [Vec<f64>; 3],
}

impl Level {
    /// `(v2, v3) / (ub + v1)` at a point of the section.
    fn slope(&self, fam: &Families, tops: &[usize; 2], y: [f64; 2]) -> Result<[f64; 2]> {
        let t2 = Trig::new(std::f64::consts::PI * y[0] / fam.cc.a, tops[0]);
        let t3 = Trig::new(std::f64::consts::PI * y[1] / fam.cc.b, tops[1]);
        let u1 = self.ub + fam.cc.eval_value_with(&self.c[0], &t2, &t3);
        if !(u1 > 0.0) {
            return Err(Error::Stagnation(format!("axial speed {u1} at ({}, {})", y[0], y[1])));
        }
        Ok([fam.sc.eval_value_with(&self.c[1], &t2, &t3) / u1, fam.cs.eval_value_with(&self.c[2], &t2, &t3) / u1])
    }
}

fn tops(fam: &Families) -> [usize; 2] {
    let t = [fam.cc.top(), fam.sc.top(), fam.cs.top()];
    [t.iter().map(|v| v.0).max().unwrap(), t.iter().map(|v| v.1).max().unwrap()]
}

/// Levels at `x1` positions given as fractional node indices.
fn levels(duct: &Duct, v: &ModalVelocity, at: &[f64], ub: impl Fn(f64) -> Result<f64> + Sync) -> Result<Vec<Level>> {
    let g = &duct.disc.grid;
    at.par_iter()
        .map(|&t| {
            let x = g.l0 + t * g.h;
            let c = [0, 1, 2].map(|j| {
                v.c[j].coeffs.iter().map(|a| if t.fract() == 0.0 { a[t as usize] } else { interp_uniform(g.l0, g.h, a, x, 6) }).collect()
            });
            Ok(Level { ub: ub(x)?, c })
        })
        .collect()
}

/// 4-point Lagrange weights on the uniform nodes `k h`, `k < n`, around `y`.
fn lagrange4(n: usize, h: f64, y: f64) -> (usize, [f64; 4]) {
    let t = y / h;
    let base = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut w = [1.0; 4];
    for (j, wj) in w.iter_mut().enumerate() {
        for k in 0..4 {
            if k != j {
                *wj *= (t - (base + k) as f64) / (j as f64 - k as f64);
            }
        }
    }
    (base, w)
}

/// Bicubic interpolation of grid values `f[i2 * n3 + i3]`.
fn bicubic(cs: &CrossSection, f: &[f64], y: [f64; 2]) -> f64 {
    let (b2, w2) = lagrange4(cs.n2, cs.x2[1] - cs.x2[0], y[0]);
    let (b3, w3) = lagrange4(cs.n3, cs.x3[1] - cs.x3[0], y[1]);
    let mut acc = 0.0;
    for (j2, a) in w2.iter().enumerate() {
        for (j3, b) in w3.iter().enumerate() {
            acc += a * b * f[(b2 + j2) * cs.n3 + b3 + j3];
        }
    }
    acc
}

fn clamp_to_section(cs: &CrossSection, y: [f64; 2], i: usize) -> Result<[f64; 2]> {
    let tol = GEOMETRY_TOL * cs.a.max(cs.b);
    if y[0] < -tol || y[0] > cs.a + tol || y[1] < -tol || y[1] > cs.b + tol {
        return Err(Error::GeometryViolation(format!("streamline through node level {i} leaves the section at ({}, {})", y[0], y[1])));
    }
    Ok([y[0].clamp(0.0, cs.a), y[1].clamp(0.0, cs.b)])
}

/// `kappa` on the duct grid for the velocity `ub + v`, from its entrance values.
///
/// Streamlines are followed backward one axial cell at a time by a classical
/// Runge-Kutta step; the foot map of each level is the previous level's map,
/// interpolated bicubically, composed with that step.
pub fn solve_transport(duct: &Duct, fam: &Families, v: &ModalVelocity, kappa0: &[f64]) -> Result<Vec<Vec<f64>>> {
    let disc = &duct.disc;
    let cs = &disc.cs;
    let no = v.nodes();
    let np = cs.npts();
    let h = disc.grid.h;
    let pts = &duct.ext.bg.pts;
    let nodes: Vec<f64> = (0..no).map(|i| i as f64).collect();
    let halves: Vec<f64> = (1..no).map(|i| i as f64 - 0.5).collect();
    let ub_nodes: Vec<f64> = (0..no).map(|i| pts[i].u.value()).collect();
    let at_node = levels(duct, v, &nodes, |x| Ok(ub_nodes[((x - disc.grid.l0) / h).round() as usize]))?;
    let at_half = levels(duct, v, &halves, |x| Ok(interp_uniform(disc.grid.l0, h, &ub_nodes, x, 6)))?;
    let tops = tops(fam);
    let mut disp = vec![[0.0; 2]; np];
    let mut kappa = Vec::with_capacity(no);
    kappa.push(kappa0.to_vec());
    for i in 1..no {
        let (lo, mid, hi) = (&at_node[i - 1], &at_half[i - 1], &at_node[i]);
        let d2: Vec<f64> = disp.iter().map(|d| d[0]).collect();
        let d3: Vec<f64> = disp.iter().map(|d| d[1]).collect();
        let next: Vec<Result<[f64; 2]>> = (0..np)
            .into_par_iter()
            .map(|p| {
                let (x2, x3) = cs.point(p);
                let y0 = [x2, x3];
                let step = |k: [f64; 2], s: f64| [y0[0] - s * k[0], y0[1] - s * k[1]];
                let k1 = hi.slope(fam, &tops, y0)?;
                let k2 = mid.slope(fam, &tops, step(k1, 0.5 * h))?;
                let k3 = mid.slope(fam, &tops, step(k2, 0.5 * h))?;
                let k4 = lo.slope(fam, &tops, step(k3, h))?;
                let y = [0, 1].map(|c| y0[c] - h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]));
                let y = clamp_to_section(cs, y, i)?;
                Ok([y[0] + bicubic(cs, &d2, y) - x2, y[1] + bicubic(cs, &d3, y) - x3])
            })
            .collect();
        disp = next.into_iter().collect::<Result<_>>()?;
        let row = (0..np)
            .map(|p| {
                let (x2, x3) = cs.point(p);
                let foot = clamp_to_section(cs, [x2 + disp[p][0], x3 + disp[p][1]], i)?;
                Ok(bicubic(cs, kappa0, foot))
            })
            .collect::<Result<Vec<f64>>>()?;
        kappa.push(row);
    }
    Ok(kappa)
}

/// Outcome of [`streamline_check`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct StreamlineReport {
    pub lines: usize,
    /// Largest `|kappa(x) - kappa(start)|` over the nodes crossed.
    pub max_variation: f64,
    pub max_kappa: f64,
}

/// Independent check of the transport: streamlines are traced forward from
/// the entrance with half-cell Runge-Kutta steps, and `kappa` is read off
/// at every node level through its full sine interpolant on the section.
pub fn streamline_check(duct: &Duct, fam: &Families, v: &ModalVelocity, kappa: &[Vec<f64>], lines: usize) -> Result<StreamlineReport> {
    let disc = &duct.disc;
    let cs = &disc.cs;
    let no = v.nodes();
    let h = disc.grid.h;
    // quarter-cell levels with the background evaluated exactly
    let quarters: Vec<f64> = (0..4 * (no - 1) + 1).map(|q| q as f64 / 4.0).collect();
    let at = levels(duct, v, &quarters, |x| Ok(background_point(&duct.gas, &duct.force, x)?.u.value()))?;
    let pairs: Vec<(usize, usize)> = (1..cs.n2 - 1).flat_map(|m| (1..cs.n3 - 1).map(move |n| (m, n))).collect();
    let full = ScalarEigenBasis::from_pairs(cs, BasisKind::Dirichlet, &pairs)?;
    let interp: Vec<Vec<f64>> = kappa.par_iter().map(|k| full.analyze_slice(cs, k)).collect::<Result<_>>()?;
    let interp = SpectralField { coeffs: interp };
    let tops = tops(fam);
    let halton = |mut i: usize, b: usize| {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= b as f64;
            r += f * (i % b) as f64;
            i /= b;
        }
        r
    };
    let results: Vec<Result<(f64, f64)>> = (1..=lines)
        .into_par_iter()
        .map(|l| {
            let mut y = [cs.a * (0.1 + 0.8 * halton(l, 2)), cs.b * (0.1 + 0.8 * halton(l, 3))];
            let k0 = full.eval_value(&interp.coeffs[0], y[0], y[1]);
            let mut worst = 0.0f64;
            for i in 0..no - 1 {
                for half in 0..2 {
                    let q = 4 * i + 2 * half;
                    let s = 0.5 * h;
                    let k1 = at[q].slope(fam, &tops, y)?;
                    let k2 = at[q + 1].slope(fam, &tops, [y[0] + 0.5 * s * k1[0], y[1] + 0.5 * s * k1[1]])?;
                    let k3 = at[q + 1].slope(fam, &tops, [y[0] + 0.5 * s * k2[0], y[1] + 0.5 * s * k2[1]])?;
                    let k4 = at[q + 2].slope(fam, &tops, [y[0] + s * k3[0], y[1] + s * k3[1]])?;
                    y = [0, 1].map(|c| y[c] + s / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]));
                }
                let k = full.eval_value(&interp.coeffs[i + 1], y[0], y[1]);
                worst = worst.max((k - k0).abs());
            }
            Ok((worst, k0.abs()))
        })
        .collect();
    let mut report = StreamlineReport { lines, max_variation: 0.0, max_kappa: 0.0 };
    for r in results {
        let (w, k) = r?;
        report.max_variation = report.max_variation.max(w);
        report.max_kappa = report.max_kappa.max(k);
    }
    Ok(report)
}
