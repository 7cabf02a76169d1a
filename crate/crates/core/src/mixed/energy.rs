//! Term-by-term evaluation of the `d(x1) d1 psi` multiplier identity.

use serde::Serialize;

use super::coeffs::{hessian, MixedCoefficients};
use super::Discretization;
use crate::fd::{quadrature_weights, Stencils};
use crate::xsection::SpectralField;

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// `\int d d1psi F`.
    pub lhs: f64,
    /// Boundary terms at `L1` minus those at `L0`.
    pub boundary: f64,
    /// `\int (d k1 - (d k11)'/2 - d d_i k1i) (d1 psi)^2`.
    pub interior_axial: f64,
    /// Transverse interior terms.
    pub interior_transverse: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|, tiny)`.
    pub relative_imbalance: f64,
    /// Smallest coefficient of `(d1 psi)^2` in the interior integrand.
    pub coercivity_axial: f64,
    /// Smallest coefficient of `|grad' psi|^2`: `d'/2` times the transverse ellipticity.
    pub coercivity_transverse: f64,
    /// `\int |d1psi(L0)|^2 + |grad psi(L1)|^2 + ||psi||_H1^2`.
    pub energy: f64,
    pub f_l2_sq: f64,
    /// Observed constant `energy / ||F||^2`.
    pub constant: f64,
}

impl EnergyReport {
    /// Flat `name = value` text.
    pub fn to_kv(&self) -> String {
        let v = serde_json::to_value(self).expect("plain numeric report");
        let mut out = String::new();
        if let serde_json::Value::Object(map) = v {
            for (k, v) in map {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

/// Derivative along `x2` (`dir = 0`) or `x3` (`dir = 1`) of a cross-section slice.
fn cross_derivative(disc: &Discretization, f: &[f64], dir: usize, st2: &Stencils, st3: &Stencils) -> Vec<f64> {
    let (n2, n3) = (disc.cs.n2, disc.cs.n3);
    let mut out = vec![0.0; f.len()];
    if dir == 0 {
        for i3 in 0..n3 {
            let line: Vec<f64> = (0..n2).map(|i2| f[i2 * n3 + i3]).collect();
            for (i2, v) in st2.apply(1, &line).into_iter().enumerate() {
                out[i2 * n3 + i3] = v;
            }
        }
    } else {
        for i2 in 0..n2 {
            let line = &f[i2 * n3..(i2 + 1) * n3];
            out[i2 * n3..(i2 + 1) * n3].copy_from_slice(&st3.apply(1, line));
        }
    }
    out
}

/// Evaluate every term of the multiplier identity for `psi` with multiplier
/// `d = 6 (x1 - d0)`. Wall conormal terms are assumed to vanish.
pub fn energy_diagnostics(disc: &Discretization, coeffs: &MixedCoefficients, psi: &SpectralField, d0: f64) -> EnergyReport {
    let no = disc.omega_nodes();
    let np = disc.cs.npts();
    let x = disc.grid.omega_x();
    let h = disc.grid.h;
    let wx = quadrature_weights(no, h);
    let wc = &disc.cs.weights;
    let g = [disc.values(psi, 1, 0), disc.values(psi, 0, 1), disc.values(psi, 0, 2)];
    let val = disc.values(psi, 0, 0);
    let hs = hessian(disc, psi);
    let st2 = Stencils::new(disc.cs.n2, disc.cs.x2[1] - disc.cs.x2[0], 5, 1);
    let st3 = Stencils::new(disc.cs.n3, disc.cs.x3[1] - disc.cs.x3[0], 5, 1);

    // full coefficients k[s][i][p] and their derivatives
    let k: Vec<Vec<Vec<f64>>> = (0..6).map(|s| (0..no).map(|i| (0..np).map(|p| coeffs.k_at(i, p)[s]).collect()).collect()).collect();
    let dk1: Vec<Vec<Vec<f64>>> = k
        .iter()
        .map(|ks| {
            let mut out = vec![vec![0.0; np]; no];
            for p in 0..np {
                let line: Vec<f64> = (0..no).map(|i| ks[i][p]).collect();
                for (i, v) in disc.st_omega.apply(1, &line).into_iter().enumerate() {
                    out[i][p] = v;
                }
            }
            out
        })
        .collect();
    let dx = |s: usize, dir: usize| -> Vec<Vec<f64>> { (0..no).map(|i| cross_derivative(disc, &k[s][i], dir, &st2, &st3)).collect() };
    // d2 k12 + d3 k13, and d_i k_ij for j = 2, 3
    let (d2k12, d3k13) = (dx(1, 0), dx(2, 1));
    let (d2k22, d3k23, d2k23, d3k33) = (dx(3, 0), dx(4, 1), dx(4, 0), dx(5, 1));

    let idx = |i: usize, j: usize| super::coeffs::slot(i, j);
    let mut lhs = 0.0;
    let mut ax = 0.0;
    let mut tr = 0.0;
    let mut coer_ax = f64::INFINITY;
    let mut coer_tr = f64::INFINITY;
    let mut f2 = 0.0;
    let mut h1 = 0.0;
    for i in 0..no {
        let d = 6.0 * (x[i] - d0);
        let k1 = coeffs.k1(i);
        for p in 0..np {
            let w = wx[i] * wc[p];
            let kk = |a: usize, b: usize| k[idx(a, b)][i][p];
            let f = kk(1, 1) * hs[0][i][p]
                + 2.0 * (kk(1, 2) * hs[1][i][p] + kk(1, 3) * hs[2][i][p] + kk(2, 3) * hs[4][i][p])
                + kk(2, 2) * hs[3][i][p]
                + kk(3, 3) * hs[5][i][p]
                + k1 * g[0][i][p];
            let (g1, g2, g3) = (g[0][i][p], g[1][i][p], g[2][i][p]);
            lhs += w * d * g1 * f;
            let cax = d * k1 - 0.5 * (6.0 * kk(1, 1) + d * dk1[0][i][p]) - d * (d2k12[i][p] + d3k13[i][p]);
            ax += w * cax * g1 * g1;
            coer_ax = coer_ax.min(cax);
            let gt = [g2, g3];
            let mut quad = 0.0;
            let mut dquad = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    quad += kk(a + 2, b + 2) * gt[a] * gt[b];
                    dquad += dk1[idx(a + 2, b + 2)][i][p] * gt[a] * gt[b];
                }
            }
            // sum_i d_i k_ij d_j psi
            let div_j = [d2k22[i][p] + d3k23[i][p], d2k23[i][p] + d3k33[i][p]];
            let cross = div_j[0] * g2 + div_j[1] * g3;
            tr += w * (3.0 * quad - d * cross * g1 + 0.5 * d * dquad);
            let (a, b, c) = (kk(2, 2), kk(2, 3), kk(3, 3));
            let lmin = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
            coer_tr = coer_tr.min(3.0 * lmin);
            f2 += w * f * f;
            h1 += w * (val[i][p] * val[i][p] + g1 * g1 + g2 * g2 + g3 * g3);
        }
    }
    let end_term = |i: usize| -> f64 {
        let d = 6.0 * (x[i] - d0);
        (0..np)
            .map(|p| {
                let kk = |a: usize, b: usize| k[idx(a, b)][i][p];
                let (g1, g2, g3) = (g[0][i][p], g[1][i][p], g[2][i][p]);
                let t = kk(2, 2) * g2 * g2 + 2.0 * kk(2, 3) * g2 * g3 + kk(3, 3) * g3 * g3;
                wc[p] * (0.5 * d * kk(1, 1) * g1 * g1 - 0.5 * d * t)
            })
            .sum()
    };
    let boundary = end_term(no - 1) - end_term(0);
    let rhs = boundary + ax + tr;
    let scale = lhs.abs().max(rhs.abs()).max(1e-300);
    let entr: f64 = (0..np).map(|p| wc[p] * g[0][0][p].powi(2)).sum();
    let exit: f64 = (0..np).map(|p| wc[p] * (g[0][no - 1][p].powi(2) + g[1][no - 1][p].powi(2) + g[2][no - 1][p].powi(2))).sum();
    let energy = entr + exit + h1;
    EnergyReport {
        lhs,
        boundary,
        interior_axial: ax,
        interior_transverse: tr,
        relative_imbalance: if lhs == 0.0 && rhs == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale },
        coercivity_axial: coer_ax,
        coercivity_transverse: coer_tr,
        energy,
        f_l2_sq: f2,
        constant: if f2 > 0.0 { energy / f2 } else { 0.0 },
    }
}
