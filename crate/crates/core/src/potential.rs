//! Nonlinear irrotational transonic flow: the entrance lift, the quadratic
//! source, the fixed-point map built on the linear mixed solver, the Mach
//! field and the sonic surface.
//!
//! The potential is `phi = phibar + psi + eps psi0` with `psi0 = eta0 h0`
//! carrying the entrance datum, so `psi` itself vanishes at `L0`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bgflow;
use crate::cutoff::Cutoff;
use crate::duct::Duct;
use crate::error::{Error, Result};
use crate::fd::{interp_uniform, Stencils};
use crate::mixed::{self, hessian, LadderReport, MixedCoefficients, ScaledPotential, Velocity};
use crate::xsection::{ModeJet, SpectralField};

/// Entrance datum `h0 = amp P(x2/a) P(x3/b)` with `P(t) = (1 - cos 2 pi t)^2`.
///
/// `P`, `P'` and `P''` vanish at both ends, so the tangential gradient and
/// its normal derivative vanish on the wall; `h0 = 0` at the corner anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntranceDatum {
    pub amplitude: f64,
}

fn wall_profile(x: f64, len: f64) -> [f64; 3] {
    let w = 2.0 * PI / len;
    let (s, c) = (w * x).sin_cos();
    let one = 1.0 - c;
    [one * one, 2.0 * one * w * s, 2.0 * w * w * (s * s + one * c)]
}

impl EntranceDatum {
    /// `[h0, d2, d3, d22, d23, d33]` at `(x2, x3)`.
    pub fn jet(&self, a: f64, b: f64, x2: f64, x3: f64) -> ModeJet {
        let p = wall_profile(x2, a);
        let q = wall_profile(x3, b);
        let s = self.amplitude;
        [s * p[0] * q[0], s * p[1] * q[0], s * p[0] * q[1], s * p[2] * q[0], s * p[1] * q[1], s * p[0] * q[2]]
    }

    /// Largest wall value of `(d2 h0, d3 h0)` and of its normal derivative,
    /// and `|h0|` at the anchor corner.
    pub fn compatibility_residual(&self, duct: &Duct) -> f64 {
        let cs = &duct.disc.cs;
        let mut worst = self.jet(cs.a, cs.b, 0.0, 0.0)[0].abs();
        for &(p, _) in &cs.boundary {
            let (x2, x3) = cs.point(p);
            let j = self.jet(cs.a, cs.b, x2, x3);
            worst = worst.max(j[1].abs()).max(j[2].abs());
            for n in cs.edge_normals(p) {
                worst = worst.max((n[0] * j[3] + n[1] * j[4]).abs()).max((n[0] * j[4] + n[1] * j[5]).abs());
            }
        }
        worst
    }
}

/// Force-potential perturbation
/// `Phi0 = amp (x1 - L0)/(L1 - L0) (cos(2 pi x2/a) + cos(2 pi x3/b))`.
///
/// Its normal derivative vanishes on the wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcePerturbation {
    pub amplitude: f64,
}

impl ForcePerturbation {
    /// `[Phi0, d1, d2, d3]`.
    pub fn eval(&self, duct: &Duct, x1: f64, x2: f64, x3: f64) -> [f64; 4] {
        let (l0, l1) = (duct.config.l0, duct.config.l1);
        let (a, b) = (duct.disc.cs.a, duct.disc.cs.b);
        let s = (x1 - l0) / (l1 - l0);
        let (w2, w3) = (2.0 * PI / a, 2.0 * PI / b);
        let (s2, c2) = (w2 * x2).sin_cos();
        let (s3, c3) = (w3 * x3).sin_cos();
        let amp = self.amplitude;
        [amp * s * (c2 + c3), amp * (c2 + c3) / (l1 - l0), -amp * s * w2 * s2, -amp * s * w3 * s3]
    }

    /// `eps Phi0` and its gradient on the duct grid.
    pub fn scaled(&self, duct: &Duct, eps: f64) -> ScaledPotential {
        let x = duct.disc.grid.omega_x();
        let cs = &duct.disc.cs;
        let mut out = ScaledPotential::zeros(x.len(), cs.npts());
        for (i, &x1) in x.iter().enumerate() {
            for p in 0..cs.npts() {
                let (x2, x3) = cs.point(p);
                let v = self.eval(duct, x1, x2, x3);
                out.phi[i][p] = eps * v[0];
                for d in 0..3 {
                    out.grad[d][i][p] = eps * v[d + 1];
                }
            }
        }
        out
    }
}

/// Settings of the irrotational solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub eps: f64,
    /// Largest accepted `eps`.
    pub eps_cap: f64,
    pub h0_amplitude: f64,
    pub phi0_amplitude: f64,
    /// Stop when the H1 norm of successive differences falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Regularisation ladder. Values above the exit-layer ceiling or below
    /// the grid floor are skipped.
    pub ladder: Vec<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            eps: 1e-3,
            eps_cap: 0.05,
            h0_amplitude: 1e-8,
            phi0_amplitude: 1.0,
            tol: 1e-10,
            max_iter: 40,
            ladder: vec![3e-3, 2.5e-3, 2e-3, 1.5e-3],
        }
    }
}

#[derive(Debug, Clone)]
pub struct PotentialProblem<'a> {
    pub duct: &'a Duct,
    pub eps: f64,
    pub h0: EntranceDatum,
    pub phi0: ForcePerturbation,
    /// Ball radius `sqrt(eps)`.
    pub delta0: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub ladder: Vec<f64>,
}

impl<'a> PotentialProblem<'a> {
    pub fn new(duct: &'a Duct, cfg: &PotentialConfig) -> Result<Self> {
        if !(cfg.eps >= 0.0 && cfg.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be a nonnegative number, got {}", cfg.eps)));
        }
        if cfg.eps > cfg.eps_cap {
            return Err(Error::InadmissibleData(format!("eps = {} exceeds the configured cap {}", cfg.eps, cfg.eps_cap)));
        }
        if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
            return Err(Error::Config("tolerance and iteration cap must be positive".into()));
        }
        let h0 = EntranceDatum { amplitude: cfg.h0_amplitude };
        let compat = h0.compatibility_residual(duct);
        if compat > 1e-8 {
            return Err(Error::Compatibility(format!("entrance datum violates the wall conditions by {compat:e}")));
        }
        Ok(PotentialProblem {
            duct,
            eps: cfg.eps,
            h0,
            phi0: ForcePerturbation { amplitude: cfg.phi0_amplitude },
            delta0: cfg.eps.sqrt(),
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            ladder: cfg.ladder.clone(),
        })
    }
}

/// Derivative slots of a lifted field.
pub const LIFT_SLOTS: [&str; 10] = ["f", "d1", "d2", "d3", "d11", "d12", "d13", "d22", "d23", "d33"];

/// `psi0 = eta0(x1) h0(x')` and its derivatives up to order two on the duct
/// grid, `d[slot][i][p]` with slots ordered as [`LIFT_SLOTS`].
#[derive(Debug, Clone)]
pub struct Lift {
    pub d: Vec<Vec<Vec<f64>>>,
}

impl Lift {
    pub fn grad(&self, i: usize, p: usize) -> [f64; 3] {
        [self.d[1][i][p], self.d[2][i][p], self.d[3][i][p]]
    }
}

/// Entrance lift of `h0`, supported in `[L0, 0.9 L0]`.
pub fn boundary_lift(duct: &Duct, h0: &EntranceDatum) -> Lift {
    let cs = &duct.disc.cs;
    let x = duct.disc.grid.omega_x();
    let eta = Cutoff::Eta0 { l0: duct.config.l0 };
    let hj: Vec<ModeJet> = (0..cs.npts()).map(|p| {
        let (x2, x3) = cs.point(p);
        h0.jet(cs.a, cs.b, x2, x3)
    }).collect();
    let mut d = vec![vec![vec![0.0; cs.npts()]; x.len()]; 10];
    for (i, &x1) in x.iter().enumerate() {
        let e = eta.eval_jet(crate::jet::Jet::variable(x1));
        let (e0, e1, e2) = (e.deriv(0), e.deriv(1), e.deriv(2));
        if e0 == 0.0 && e1 == 0.0 && e2 == 0.0 {
            continue;
        }
        for (p, h) in hj.iter().enumerate() {
            let vals = [e0 * h[0], e1 * h[0], e0 * h[1], e0 * h[2], e2 * h[0], e1 * h[1], e1 * h[2], e0 * h[3], e0 * h[4], e0 * h[5]];
            for (s, v) in vals.into_iter().enumerate() {
                d[s][i][p] = v;
            }
        }
    }
    Lift { d }
}

/// Gradient of a duct field on the grid.
pub fn gradient(duct: &Duct, psi: &SpectralField) -> [Vec<Vec<f64>>; 3] {
    let disc = &duct.disc;
    [disc.values(psi, 1, 0), disc.values(psi, 0, 1), disc.values(psi, 0, 2)]
}

/// Velocity perturbation `grad psi + eps grad psi0`.
fn perturbation(duct: &Duct, psi: &SpectralField, lift: &Lift, eps: f64) -> Velocity {
    let mut v = gradient(duct, psi);
    for (d, comp) in v.iter_mut().enumerate() {
        for (row, l) in comp.iter_mut().zip(&lift.d[d + 1]) {
            for (a, b) in row.iter_mut().zip(l) {
                *a += eps * b;
            }
        }
    }
    Velocity { v }
}

/// The source `F = F0(v) - eps (sum k_ij d_ij psi0 + kbar1 d1 psi0)` of the
/// fixed-point map, where `v` already contains `eps grad psi0`.
pub fn source_f(duct: &Duct, vel: &Velocity, phi: &ScaledPotential, lift: &Lift, coeffs: &MixedCoefficients, eps: f64) -> Vec<Vec<f64>> {
    let mut f = mixed::source_f0(&duct.ext, vel, phi);
    if eps == 0.0 {
        return f;
    }
    for (i, row) in f.iter_mut().enumerate() {
        let k1 = coeffs.k1(i);
        for (p, v) in row.iter_mut().enumerate() {
            if lift.d[0][i][p] == 0.0 && lift.d[1][i][p] == 0.0 && lift.d[4][i][p] == 0.0 && lift.d[7][i][p] == 0.0 {
                continue;
            }
            let k = coeffs.k_at(i, p);
            let l = |s: usize| lift.d[s][i][p];
            let lin = k[0] * l(4) + 2.0 * (k[1] * l(5) + k[2] * l(6) + k[4] * l(8)) + k[3] * l(7) + k[5] * l(9) + k1 * l(1);
            *v -= eps * lin;
        }
    }
    f
}

/// One step of the fixed-point iteration.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    /// H1 norm of `psi_k - psi_(k-1)`.
    pub diff_h1: f64,
    /// `diff_k / diff_(k-1)`.
    pub ratio: Option<f64>,
    /// Discrete H4 norm of the new iterate.
    pub h4: f64,
    /// L2 norm of the source on the duct.
    pub f_norm: f64,
    /// `f_norm / (eps + h4(previous)^2)`.
    pub quad_constant: f64,
    /// Largest normal derivative of the source on the entrance wall, relative to `max |F|`.
    pub entrance_wall_compat: f64,
    pub sigma_floor: f64,
    pub sigmas_used: usize,
}

/// Converged irrotational flow on the duct.
#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub eps: f64,
    pub delta0: f64,
    pub psi: SpectralField,
    /// Full velocity `grad phi`, `u[c][i][p]`.
    pub u: [Vec<Vec<f64>>; 3],
    pub rho: Vec<Vec<f64>>,
    pub mach2: Vec<Vec<f64>>,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub ladder: Option<LadderReport>,
    /// Largest discrete residual of the full potential equation off the walls and axial ends.
    pub residual: f64,
    /// Same over every node.
    pub residual_all: f64,
    pub bernoulli_defect: f64,
    pub wall_normal_residual: f64,
    /// Largest `|d_j phi(L0) - eps d_j h0|`, j = 2, 3.
    pub entrance_residual: f64,
    /// Largest H4 norm over all iterates.
    pub ball_max: f64,
}

fn h1(duct: &Duct, f: &SpectralField) -> f64 {
    duct.disc.sobolev_norm(f, 1)
}

/// Normal derivative of the entrance slice of `f` on the wall, relative to `max |f|`.
fn entrance_wall_derivative(duct: &Duct, f: &[f64]) -> f64 {
    let cs = &duct.disc.cs;
    let st2 = Stencils::new(cs.n2, cs.x2[1] - cs.x2[0], 7, 1);
    let st3 = Stencils::new(cs.n3, cs.x3[1] - cs.x3[0], 7, 1);
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for &(p, _) in &cs.boundary {
        let (i2, i3) = (p / cs.n3, p % cs.n3);
        let line2: Vec<f64> = (0..cs.n2).map(|j| f[j * cs.n3 + i3]).collect();
        let line3 = &f[i2 * cs.n3..(i2 + 1) * cs.n3];
        let g = [st2.at(1, &line2, i2), st3.at(1, line3, i3)];
        for n in cs.edge_normals(p) {
            worst = worst.max((n[0] * g[0] + n[1] * g[1]).abs());
        }
    }
    worst / scale
}

/// Iterate `psi <- T psi` from `psi = 0` until successive differences are
/// below the tolerance in H1.
/// Solve the linear mixed problem for `load`, keeping only ladder values
/// below the layer ceiling of the current coefficients. A zero load gives
/// a zero solution and no ladder report.
pub fn mixed_correction(duct: &Duct, coeffs: &MixedCoefficients, load: &SpectralField, ladder: &[f64]) -> Result<(SpectralField, Option<LadderReport>)> {
    let disc = &duct.disc;
    if load.max_abs() == 0.0 {
        return Ok((SpectralField::zeros(disc.modes(), disc.omega_nodes()), None));
    }
    let sys = mixed::assemble_system(disc, coeffs)?;
    let ceiling = mixed::layer_ceiling(disc, coeffs);
    let kept: Vec<f64> = ladder.iter().copied().filter(|&s| s <= ceiling).collect();
    let (s, mut r) = mixed::solve_linear_mixed(disc, &sys, coeffs, load, &kept)?;
    r.skipped.extend(ladder.iter().filter(|&&s| s > ceiling));
    Ok((s, Some(r)))
}

pub fn fixed_point_solve(problem: &PotentialProblem) -> Result<PotentialSolution> {
    let duct = problem.duct;
    let disc = &duct.disc;
    let eps = problem.eps;
    let lift = boundary_lift(duct, &problem.h0);
    let phi = problem.phi0.scaled(duct, eps);
    let mut psi = SpectralField::zeros(disc.modes(), disc.omega_nodes());
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut ladder = None;
    let mut converged = false;
    let mut ball_max = 0.0f64;
    let mut prev_h4 = 0.0;
    let mut growth = 0;
    for k in 1..=problem.max_iter {
        let vel = perturbation(duct, &psi, &lift, eps);
        let coeffs = mixed::assemble_coefficients(&duct.ext, disc, &vel, &phi)?;
        let f = source_f(duct, &vel, &phi, &lift, &coeffs, eps);
        let compat = entrance_wall_derivative(duct, &f[0]);
        let load = disc.project(&f)?;
        let f_norm = mixed::galerkin::l2(disc, &load);
        let (next, report) = mixed_correction(duct, &coeffs, &load, &problem.ladder)?;
        let h4 = disc.sobolev_norm(&next, 4);
        ball_max = ball_max.max(h4);
        if h4 > problem.delta0 {
            return Err(Error::BallEscape(format!(
                "iterate {k} has H4 norm {h4:e} > delta0 = {:e}; earlier norms {:?}",
                problem.delta0,
                history.iter().map(|r| r.h4).collect::<Vec<_>>()
            )));
        }
        let mut d = next.clone();
        d.axpy(-1.0, &psi);
        let diff = h1(duct, &d);
        let ratio = history.last().and_then(|r| (r.diff_h1 > 0.0).then(|| diff / r.diff_h1));
        growth = if ratio.is_some_and(|r| r > 1.0) { growth + 1 } else { 0 };
        history.push(IterationRecord {
            k,
            diff_h1: diff,
            ratio,
            h4,
            f_norm,
            quad_constant: if f_norm == 0.0 { 0.0 } else { f_norm / (eps + prev_h4 * prev_h4) },
            entrance_wall_compat: compat,
            sigma_floor: report.as_ref().map_or(0.0, |r| r.sigma_floor),
            sigmas_used: report.as_ref().map_or(0, |r| r.sigmas.len()),
        });
        if report.is_some() {
            ladder = report;
        }
        psi = next;
        prev_h4 = h4;
        if diff <= problem.tol {
            converged = true;
            break;
        }
        if growth >= 2 {
            return Err(Error::NonContraction(format!("successive differences grew twice in a row, last ratio {:?}", ratio)));
        }
    }
    if !converged {
        let last = history.last().map_or(f64::NAN, |r| r.diff_h1);
        return Err(Error::SolverDiverged(format!("no convergence in {} iterations; last difference {last:e}", problem.max_iter)));
    }
    finish(problem, psi, &lift, &phi, history, ladder, ball_max)
}

fn finish(
    problem: &PotentialProblem,
    psi: SpectralField,
    lift: &Lift,
    phi: &ScaledPotential,
    history: Vec<IterationRecord>,
    ladder: Option<LadderReport>,
    ball_max: f64,
) -> Result<PotentialSolution> {
    let duct = problem.duct;
    let disc = &duct.disc;
    let gas = &duct.gas;
    let eps = problem.eps;
    let no = disc.omega_nodes();
    let np = disc.cs.npts();
    let vel = perturbation(duct, &psi, lift, eps);
    let hs = hessian(disc, &psi);
    let mut u = vel.v.clone();
    let mut rho = vec![vec![0.0; np]; no];
    let mut mach2 = vec![vec![0.0; np]; no];
    let mut bern = 0.0f64;
    let mut res = 0.0f64;
    let mut res_all = 0.0f64;
    let interior = |i: usize, p: usize| {
        let (i2, i3) = (p / disc.cs.n3, p % disc.cs.n3);
        i > 0 && i + 1 < no && i2 > 0 && i2 + 1 < disc.cs.n2 && i3 > 0 && i3 + 1 < disc.cs.n3
    };
    for i in 0..no {
        let bp = &duct.ext.bg.pts[i];
        let (ub, dub, phib, fb) = (bp.u.value(), bp.u.deriv(1), bp.phi.value(), bp.f.value());
        for p in 0..np {
            u[0][i][p] += ub;
            let uu = [u[0][i][p], u[1][i][p], u[2][i][p]];
            let q2 = uu.iter().map(|v| v * v).sum::<f64>();
            let budget = gas.b0 + phib + phi.phi[i][p] - 0.5 * q2;
            if !(budget > 0.0) {
                return Err(Error::Stagnation(format!("enthalpy budget {budget} not positive at node ({i}, {p})")));
            }
            let r = gas.density_from_budget(budget);
            rho[i][p] = r;
            let c2 = gas.sound_speed2(r);
            mach2[i][p] = q2 / c2;
            bern = bern.max((0.5 * q2 + gas.enthalpy(r) - phib - phi.phi[i][p] - gas.b0).abs());
            // second derivatives of the full potential
            let l = |s: usize| eps * lift.d[s][i][p];
            let d = [
                [dub + hs[0][i][p] + l(4), hs[1][i][p] + l(5), hs[2][i][p] + l(6)],
                [hs[1][i][p] + l(5), hs[3][i][p] + l(7), hs[4][i][p] + l(8)],
                [hs[2][i][p] + l(6), hs[4][i][p] + l(8), hs[5][i][p] + l(9)],
            ];
            let grad_phi = [fb + phi.grad[0][i][p], phi.grad[1][i][p], phi.grad[2][i][p]];
            let lap = d[0][0] + d[1][1] + d[2][2];
            let mut conv = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    conv += uu[a] * uu[b] * d[a][b];
                }
            }
            let work: f64 = (0..3).map(|a| uu[a] * grad_phi[a]).sum();
            let r17 = (c2 * lap - conv + work).abs();
            res_all = res_all.max(r17);
            if interior(i, p) {
                res = res.max(r17);
            }
        }
    }
    let mut wall = 0.0f64;
    for &(p, _) in &disc.cs.boundary {
        for nrm in disc.cs.edge_normals(p) {
            for i in 0..no {
                wall = wall.max((nrm[0] * u[1][i][p] + nrm[1] * u[2][i][p]).abs());
            }
        }
    }
    let mut entrance = 0.0f64;
    for p in 0..np {
        let (x2, x3) = disc.cs.point(p);
        let h = problem.h0.jet(disc.cs.a, disc.cs.b, x2, x3);
        entrance = entrance.max((u[1][0][p] - eps * h[1]).abs()).max((u[2][0][p] - eps * h[2]).abs());
    }
    Ok(PotentialSolution {
        eps,
        delta0: problem.delta0,
        psi,
        u,
        rho,
        mach2,
        history,
        converged: true,
        ladder,
        residual: res,
        residual_all: res_all,
        bernoulli_defect: bern,
        wall_normal_residual: wall,
        entrance_residual: entrance,
        ball_max,
    })
}

/// `|M|^2 = |u|^2 / c^2` on the duct grid.
pub fn mach_field(sol: &PotentialSolution) -> &Vec<Vec<f64>> {
    &sol.mach2
}

/// Sonic surface `x1 = xi(x')` with finite-difference tangential gradients.
#[derive(Debug, Clone, Serialize)]
pub struct SonicSurface {
    /// Per cross-section node, index `p = i2 * n3 + i3`.
    pub xi: Vec<f64>,
    pub dxi_dx2: Vec<f64>,
    pub dxi_dx3: Vec<f64>,
    pub sup_xi: f64,
    /// `sup |xi| + sup |grad xi|`.
    pub c1_norm: f64,
    /// Smallest axial increment of `|M|^2` between neighbouring nodes.
    pub min_increment: f64,
}

/// Locate `|M|^2 = 1` along every axial grid line: bracketing, bisection on
/// the cubic through the four surrounding nodes, then one Newton step.
/// `||M|^2 - 1|` below which a grid node counts as sonic.
const SONIC_NODE_TOL: f64 = 16.0 * f64::EPSILON;

pub fn sonic_surface(duct: &Duct, mach2: &[Vec<f64>]) -> Result<SonicSurface> {
    let disc = &duct.disc;
    let x = disc.grid.omega_x();
    let h = disc.grid.h;
    let no = x.len();
    let np = disc.cs.npts();
    let mut xi = vec![0.0; np];
    let mut min_inc = f64::INFINITY;
    for (p, out) in xi.iter_mut().enumerate() {
        let line: Vec<f64> = (0..no).map(|i| mach2[i][p]).collect();
        for i in 0..no - 1 {
            let inc = line[i + 1] - line[i];
            min_inc = min_inc.min(inc);
            if !(inc > 0.0) {
                return Err(Error::DegenerateSonic(format!("|M|^2 decreases between x1 = {} and {} at cross node {p}", x[i], x[i + 1])));
            }
        }
        let j = (0..no - 1)
            .find(|&i| line[i] < 1.0 && line[i + 1] >= 1.0)
            .ok_or_else(|| Error::NoSonicPoint(format!("|M|^2 - 1 has no sign change on (L0, L1) at cross node {p}")))?;
        let s = j.saturating_sub(1).min(no - 4);
        let xs: Vec<f64> = (0..4).map(|k| x[s + k]).collect();
        let cubic = |t: f64| -> (f64, f64) {
            let w = crate::fd::fornberg(t, &xs, 1);
            let v: f64 = (0..4).map(|k| w[0][k] * line[s + k]).sum();
            let dv: f64 = (0..4).map(|k| w[1][k] * line[s + k]).sum();
            (v - 1.0, dv)
        };
        let (mut lo, mut hi) = (x[j], x[j + 1]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cubic(mid).0 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * h {
                break;
            }
        }
        let mut t = 0.5 * (lo + hi);
        let (v, dv) = cubic(t);
        if dv > 0.0 {
            t -= v / dv;
        }
        // A node that is sonic to roundoff is the crossing itself; the
        // unperturbed flow then reports xi = 0 exactly.
        if let Some(k) = [j, j + 1].into_iter().find(|&k| (line[k] - 1.0).abs() <= SONIC_NODE_TOL) {
            t = x[k];
        }
        *out = t;
    }
    let cs = &disc.cs;
    let st2 = Stencils::new(cs.n2, cs.x2[1] - cs.x2[0], 5, 1);
    let st3 = Stencils::new(cs.n3, cs.x3[1] - cs.x3[0], 5, 1);
    let mut d2 = vec![0.0; np];
    let mut d3 = vec![0.0; np];
    for i3 in 0..cs.n3 {
        let line: Vec<f64> = (0..cs.n2).map(|i2| xi[i2 * cs.n3 + i3]).collect();
        for (i2, v) in st2.apply(1, &line).into_iter().enumerate() {
            d2[i2 * cs.n3 + i3] = v;
        }
    }
    for i2 in 0..cs.n2 {
        let line = &xi[i2 * cs.n3..(i2 + 1) * cs.n3];
        for (i3, v) in st3.apply(1, line).into_iter().enumerate() {
            d3[i2 * cs.n3 + i3] = v;
        }
    }
    let sup = xi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_grad = d2.iter().chain(&d3).fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SonicSurface { xi, dxi_dx2: d2, dxi_dx3: d3, sup_xi: sup, c1_norm: sup + sup_grad, min_increment: min_inc })
}

/// `|M|^2 - 1` at `(xi(x'), x')`, recomputed from the background at the exact
/// position and 8-point interpolation of the perturbation velocity.
pub fn sonic_check(problem: &PotentialProblem, sol: &PotentialSolution, surf: &SonicSurface) -> Result<f64> {
    sonic_check_velocity(problem.duct, problem.eps, &problem.phi0, &sol.u, surf)
}

/// [`sonic_check`] for any full velocity field `u` on the duct grid.
pub fn sonic_check_velocity(duct: &Duct, eps: f64, phi0: &ForcePerturbation, u: &[Vec<Vec<f64>>; 3], surf: &SonicSurface) -> Result<f64> {
    let disc = &duct.disc;
    let gas = &duct.gas;
    let h = disc.grid.h;
    let l0 = disc.grid.l0;
    let no = disc.omega_nodes();
    let mut worst = 0.0f64;
    for (p, &t) in surf.xi.iter().enumerate() {
        let bp = bgflow::background_point(gas, &duct.force, t)?;
        let (x2, x3) = disc.cs.point(p);
        let mut uu = [0.0; 3];
        for (c, o) in uu.iter_mut().enumerate() {
            let line: Vec<f64> = (0..no).map(|i| u[c][i][p] - if c == 0 { duct.ext.bg.pts[i].u.value() } else { 0.0 }).collect();
            *o = interp_uniform(l0, h, &line, t, 8);
        }
        uu[0] += bp.u.value();
        let q2: f64 = uu.iter().map(|v| v * v).sum();
        let phi = bp.phi.value() + eps * phi0.eval(duct, t, x2, x3)[0];
        let c2 = gas.sound_speed2(gas.density_from_budget(gas.b0 + phi - 0.5 * q2));
        worst = worst.max((q2 / c2 - 1.0).abs());
    }
    Ok(worst)
}

impl PotentialSolution {
    /// `x1,x2,x3,u1,u2,u3,rho,M2` at every duct node.
    pub fn write_fields_csv<W: Write>(&self, duct: &Duct, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x1,x2,x3,u1,u2,u3,rho,M2")?;
        let x = duct.disc.grid.omega_x();
        for (i, &x1) in x.iter().enumerate() {
            for p in 0..duct.disc.cs.npts() {
                let (x2, x3) = duct.disc.cs.point(p);
                writeln!(
                    w,
                    "{x1:.10e},{x2:.10e},{x3:.10e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.u[0][i][p], self.u[1][i][p], self.u[2][i][p], self.rho[i][p], self.mach2[i][p]
                )?;
            }
        }
        Ok(())
    }

    /// Iteration log and final diagnostics as `key = value` lines.
    pub fn iteration_log(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("eps = {:e}\ndelta0 = {:e}\niterations = {}\nconverged = {}\n", self.eps, self.delta0, self.history.len(), self.converged));
        for r in &self.history {
            s.push_str(&format!(
                "iter{}.diff_h1 = {:e}\niter{}.ratio = {}\niter{}.h4 = {:e}\niter{}.f_norm = {:e}\niter{}.quad_constant = {:e}\niter{}.entrance_wall_compat = {:e}\n",
                r.k,
                r.diff_h1,
                r.k,
                r.ratio.map_or("none".to_string(), |v| format!("{v:e}")),
                r.k,
                r.h4,
                r.k,
                r.f_norm,
                r.k,
                r.quad_constant,
                r.k,
                r.entrance_wall_compat
            ));
        }
        s.push_str(&format!(
            "ball_max_h4 = {:e}\nresidual_interior = {:e}\nresidual_all = {:e}\nbernoulli_defect = {:e}\nwall_normal_residual = {:e}\nentrance_residual = {:e}\n",
            self.ball_max, self.residual, self.residual_all, self.bernoulli_defect, self.wall_normal_residual, self.entrance_residual
        ));
        if let Some(l) = &self.ladder {
            s.push_str(&format!("sigma_floor = {:e}\nsigmas = {:?}\nskipped = {:?}\n", l.sigma_floor, l.sigmas, l.skipped));
        }
        s
    }
}

impl SonicSurface {
    pub fn write_csv<W: Write>(&self, duct: &Duct, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x2,x3,xi,dxi_dx2,dxi_dx3")?;
        for p in 0..self.xi.len() {
            let (x2, x3) = duct.disc.cs.point(p);
            writeln!(w, "{x2:.10e},{x3:.10e},{:.16e},{:.16e},{:.16e}", self.xi[p], self.dxi_dx2[p], self.dxi_dx3[p])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duct::DuctConfig;

    fn small_duct() -> Duct {
        Duct::build(&DuctConfig { modes: 4, symmetric: true, ..Default::default() }).unwrap()
    }

    #[test]
    fn lift_matches_datum_at_entrance_and_vanishes_downstream() {
        let duct = small_duct();
        let h0 = EntranceDatum { amplitude: 0.3 };
        let lift = boundary_lift(&duct, &h0);
        let cs = &duct.disc.cs;
        for p in 0..cs.npts() {
            let (x2, x3) = cs.point(p);
            let h = h0.jet(cs.a, cs.b, x2, x3);
            assert_eq!(lift.d[0][0][p], h[0]);
            assert_eq!(lift.d[2][0][p], h[1]);
            assert_eq!(lift.d[3][0][p], h[2]);
        }
        let x = duct.disc.grid.omega_x();
        for (i, &x1) in x.iter().enumerate() {
            if x1 >= 0.9 * duct.config.l0 {
                assert!(lift.d.iter().all(|s| s[i].iter().all(|v| *v == 0.0)), "nonzero lift at x1 = {x1}");
            }
        }
    }

    #[test]
    fn datum_satisfies_wall_conditions() {
        let duct = Duct::build(&DuctConfig { a: 2.0, b: 1.3, modes: 4, ..Default::default() }).unwrap();
        let h0 = EntranceDatum { amplitude: 1.0 };
        assert!(h0.compatibility_residual(&duct) < 1e-8);
        // interior values are not trivially zero
        assert!(h0.jet(2.0, 1.3, 1.0, 0.65)[0] > 1.0);
    }

    #[test]
    fn datum_derivatives_match_finite_differences() {
        let h0 = EntranceDatum { amplitude: 0.7 };
        let (a, b, x2, x3, e) = (PI, 2.0, 0.9, 0.4, 1e-5);
        let j = h0.jet(a, b, x2, x3);
        let f = |u: f64, v: f64| h0.jet(a, b, u, v);
        assert!(((f(x2 + e, x3)[0] - f(x2 - e, x3)[0]) / (2.0 * e) - j[1]).abs() < 1e-8);
        assert!(((f(x2, x3 + e)[0] - f(x2, x3 - e)[0]) / (2.0 * e) - j[2]).abs() < 1e-8);
        assert!(((f(x2 + e, x3)[1] - f(x2 - e, x3)[1]) / (2.0 * e) - j[3]).abs() < 1e-7);
        assert!(((f(x2, x3 + e)[1] - f(x2, x3 - e)[1]) / (2.0 * e) - j[4]).abs() < 1e-7);
        assert!(((f(x2, x3 + e)[2] - f(x2, x3 - e)[2]) / (2.0 * e) - j[5]).abs() < 1e-7);
    }

    fn source_at(duct: &Duct, psi: &SpectralField, eps: f64) -> Vec<Vec<f64>> {
        let h0 = EntranceDatum { amplitude: PotentialConfig::default().h0_amplitude };
        let lift = boundary_lift(duct, &h0);
        let phi = ForcePerturbation { amplitude: 1.0 }.scaled(duct, eps);
        let vel = perturbation(duct, psi, &lift, eps);
        let coeffs = mixed::assemble_coefficients(&duct.ext, &duct.disc, &vel, &phi).unwrap();
        source_f(duct, &vel, &phi, &lift, &coeffs, eps)
    }

    fn probe_field(duct: &Duct, amp: f64) -> SpectralField {
        let x = duct.disc.grid.omega_x();
        let l0 = duct.config.l0;
        let mut f = SpectralField::zeros(duct.disc.modes(), x.len());
        for (i, &x1) in x.iter().enumerate() {
            f.coeffs[1][i] = amp * (x1 - l0) * (x1 - l0).cos();
            f.coeffs[2][i] = 0.5 * amp * (x1 - l0).powi(2);
        }
        f
    }

    fn sup(f: &[Vec<f64>]) -> f64 {
        f.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn source_vanishes_without_data() {
        let duct = small_duct();
        let psi = SpectralField::zeros(duct.disc.modes(), duct.disc.omega_nodes());
        assert_eq!(sup(&source_at(&duct, &psi, 0.0)), 0.0);
    }

    #[test]
    fn source_is_quadratic_in_the_iterate() {
        let duct = small_duct();
        let f1 = sup(&source_at(&duct, &probe_field(&duct, 1e-3), 0.0));
        let f2 = sup(&source_at(&duct, &probe_field(&duct, 2e-3), 0.0));
        assert!(f1 > 0.0);
        assert!((f2 / f1 - 4.0).abs() < 1e-9, "ratio {}", f2 / f1);
    }

    #[test]
    fn source_difference_is_small_multiple_of_the_step() {
        // directional difference quotient of F at an iterate of size delta
        let duct = small_duct();
        let eps = 1e-3;
        let base = probe_field(&duct, 1e-3);
        let dir = probe_field(&duct, 1.0);
        let q = |t: f64| {
            let mut p = base.clone();
            p.axpy(t, &dir);
            let a = source_at(&duct, &p, eps);
            let b = source_at(&duct, &base, eps);
            let d: Vec<Vec<f64>> = a.iter().zip(&b).map(|(r, s)| r.iter().zip(s).map(|(u, v)| u - v).collect()).collect();
            sup(&d) / t
        };
        let (q1, q2) = (q(1e-5), q(5e-6));
        // the quotient converges linearly in the step
        assert!((q1 - q2).abs() < 1e-2 * q1, "{q1} {q2}");
        // and its size is set by eps and the iterate, not by the step direction
        let dmax = sup(&duct.disc.values(&dir, 1, 0)).max(sup(&duct.disc.values(&dir, 0, 1)));
        assert!(q2 / dmax < 0.05, "Lipschitz factor {}", q2 / dmax);
    }

    fn synthetic_mach(duct: &Duct, shift: impl Fn(f64, f64) -> f64) -> Vec<Vec<f64>> {
        let cs = &duct.disc.cs;
        duct.disc
            .grid
            .omega_x()
            .iter()
            .map(|&x1| (0..cs.npts()).map(|p| {
                let (x2, x3) = cs.point(p);
                (x1 - shift(x2, x3)).exp()
            }).collect())
            .collect()
    }

    #[test]
    fn sonic_surface_recovers_a_known_surface() {
        let duct = small_duct();
        let c = |x2: f64, x3: f64| 0.01 * x2.sin() * x3.cos();
        let s = sonic_surface(&duct, &synthetic_mach(&duct, c)).unwrap();
        let cs = &duct.disc.cs;
        for p in 0..cs.npts() {
            let (x2, x3) = cs.point(p);
            assert!((s.xi[p] - c(x2, x3)).abs() < 1e-11, "{} vs {}", s.xi[p], c(x2, x3));
            assert!((s.dxi_dx2[p] - 0.01 * x2.cos() * x3.cos()).abs() < 2e-5);
            assert!((s.dxi_dx3[p] + 0.01 * x2.sin() * x3.sin()).abs() < 2e-5);
        }
    }

    #[test]
    fn sonic_surface_reports_degenerate_and_missing_crossings() {
        let duct = small_duct();
        let mut m = synthetic_mach(&duct, |_, _| 0.0);
        m[10][3] = m[9][3] - 1e-3;
        assert!(matches!(sonic_surface(&duct, &m), Err(Error::DegenerateSonic(_))));
        let sub = synthetic_mach(&duct, |_, _| 2.0);
        assert!(matches!(sonic_surface(&duct, &sub), Err(Error::NoSonicPoint(_))));
    }

    #[test]
    fn zero_amplitude_gives_the_background() {
        let duct = small_duct();
        let cfg = PotentialConfig { eps: 0.0, ..Default::default() };
        let pb = PotentialProblem::new(&duct, &cfg).unwrap();
        let sol = fixed_point_solve(&pb).unwrap();
        assert_eq!(sol.history.len(), 1);
        assert_eq!(sol.psi.max_abs(), 0.0);
        let s = sonic_surface(&duct, &sol.mach2).unwrap();
        assert!(s.sup_xi < 1e-12, "{}", s.sup_xi);
        assert!(sol.bernoulli_defect < 1e-12);
    }

    #[test]
    fn amplitude_above_the_cap_is_rejected() {
        let duct = small_duct();
        let cfg = PotentialConfig { eps: 0.1, ..Default::default() };
        assert!(matches!(PotentialProblem::new(&duct, &cfg), Err(Error::InadmissibleData(_))));
    }
}
