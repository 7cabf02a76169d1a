//! The fixed point for rotational flows whose vorticity is parallel to the
//! mass flux: transport of `kappa`, the auxiliary potential `Pi`, the
//! div-curl solve and the mixed-type potential correction, repeated until
//! the velocity settles.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::data::{FlatMode, TangentialDatum};
use super::divcurl::{solve_divcurl, solve_pi, CurlSource};
use super::fields::{density, values, Families, ModalVelocity};
use super::transport::{kappa_boundary, solve_transport};
use crate::duct::Duct;
use crate::error::{Error, Result};
use crate::fd::Stencils;
use crate::mixed::coeffs::slot;
use crate::mixed::{self, LadderReport, ScaledPotential, Velocity};
use crate::potential::{mixed_correction, sonic_check_velocity, sonic_surface, ForcePerturbation, SonicSurface};
use crate::xsection::SpectralField;

/// Largest accepted wall violation of the entrance data.
pub const DATA_COMPAT_TOL: f64 = 1e-8;

/// Axial subsampling of the difference norm. Roundoff of the extrapolated
/// mixed solve sits at the grid scale, and full-resolution third-derivative
/// stencils lift it to a floor near 1e-6 while the velocities agree to 1e-12.
pub const DIFF_STRIDE: usize = 8;

/// Settings of the rotational solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeltramiConfig {
    pub eps: f64,
    /// Largest accepted `eps`.
    pub eps_cap: f64,
    /// Entrance tangential velocity, before scaling by `eps`.
    pub datum: TangentialDatum,
    pub phi0_amplitude: f64,
    /// Stop when the `H2(duct) + H3(upstream third)` norm of successive
    /// differences falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub ladder: Vec<f64>,
}

impl Default for BeltramiConfig {
    fn default() -> Self {
        BeltramiConfig {
            eps: 1e-3,
            eps_cap: 0.05,
            datum: TangentialDatum { chi: vec![FlatMode { m: 1, n: 1, c: 0.02 }], g: vec![] },
            phi0_amplitude: 1.0,
            tol: 1e-6,
            max_iter: 40,
            ladder: vec![3e-3, 2.5e-3, 2e-3, 1.5e-3],
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeltramiProblem<'a> {
    pub duct: &'a Duct,
    pub eps: f64,
    pub datum: TangentialDatum,
    pub phi0: ForcePerturbation,
    /// Ball radius `sqrt(eps)` of the solution class.
    pub delta1: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub ladder: Vec<f64>,
    pub fam: Families,
    pub data_compat: f64,
}

impl<'a> BeltramiProblem<'a> {
    pub fn new(duct: &'a Duct, cfg: &BeltramiConfig) -> Result<Self> {
        if !(cfg.eps >= 0.0 && cfg.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be a nonnegative number, got {}", cfg.eps)));
        }
        if cfg.eps > cfg.eps_cap {
            return Err(Error::InadmissibleData(format!("eps = {} exceeds the configured cap {}", cfg.eps, cfg.eps_cap)));
        }
        if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
            return Err(Error::Config("tolerance and iteration cap must be positive".into()));
        }
        cfg.datum.validate()?;
        let data_compat = cfg.datum.compatibility_residual(&duct.disc.cs);
        if data_compat > DATA_COMPAT_TOL {
            return Err(Error::Compatibility(format!("entrance tangential data violate the wall conditions by {data_compat:e}")));
        }
        Ok(BeltramiProblem {
            duct,
            eps: cfg.eps,
            datum: cfg.datum.clone(),
            phi0: ForcePerturbation { amplitude: cfg.phi0_amplitude },
            delta1: cfg.eps.sqrt(),
            tol: cfg.tol,
            max_iter: cfg.max_iter,
            ladder: cfg.ladder.clone(),
            fam: Families::new(duct)?,
            data_compat,
        })
    }

    /// `eps (h2, h3)` on the entrance section.
    pub fn entrance_target(&self) -> [Vec<f64>; 2] {
        let cs = &self.duct.disc.cs;
        let jets: Vec<_> = (0..cs.npts())
            .map(|p| {
                let (x2, x3) = cs.point(p);
                self.datum.jet(cs.a, cs.b, x2, x3)
            })
            .collect();
        [jets.iter().map(|j| self.eps * j.h2[0]).collect(), jets.iter().map(|j| self.eps * j.h3[0]).collect()]
    }

    /// `H3(duct)`, the part of the class norm held inside the ball.
    pub fn ball_norm(&self, v: &ModalVelocity) -> f64 {
        v.norm(self.duct, &self.fam, 3, 1)
    }

    /// `H4(upstream third)`, reported but not enforced: it is dominated by the
    /// edges of the force bump and is about `500 eps` for the default force.
    pub fn upstream_norm(&self, v: &ModalVelocity) -> f64 {
        v.norm_third(self.duct, &self.fam, 4, 1)
    }

    /// `H2(duct) + H3(upstream third)`: the contraction norm.
    pub fn weak_norm(&self, v: &ModalVelocity) -> f64 {
        v.norm(self.duct, &self.fam, 2, DIFF_STRIDE) + v.norm_third(self.duct, &self.fam, 3, DIFF_STRIDE)
    }
}

/// Everything one application of the map produces.
#[derive(Debug, Clone)]
pub struct Step {
    pub v: ModalVelocity,
    pub kappa: Vec<Vec<f64>>,
    /// Dirichlet-family coefficients.
    pub pi: SpectralField,
    /// Harmonic part, cosine family.
    pub phi: SpectralField,
    pub grad_phi: ModalVelocity,
    /// Mixed-type correction, cosine family.
    pub psi: SpectralField,
    pub ladder: Option<LadderReport>,
    pub stream_mismatch: f64,
    pub source_divergence: f64,
    pub wall_compat: f64,
}

/// `rho kappa (ubar + v1, v2, v3)`.
fn curl_data(duct: &Duct, kappa: &[Vec<f64>], rho: &[Vec<f64>], vel: &Velocity) -> [Vec<Vec<f64>>; 3] {
    [0, 1, 2].map(|j| {
        kappa
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let ub = if j == 0 { duct.ext.bg.pts[i].u.value() } else { 0.0 };
                row.iter().enumerate().map(|(p, k)| k * rho[i][p] * (ub + vel.v[j][i][p])).collect()
            })
            .collect()
    })
}

/// One application of the map `vhat -> v`.
pub fn beltrami_step(problem: &BeltramiProblem, vhat: &ModalVelocity, phi: &ScaledPotential) -> Result<Step> {
    let duct = problem.duct;
    let disc = &duct.disc;
    let fam = &problem.fam;
    let vel = vhat.grid(duct, fam);
    let rho = density(duct, &vel, phi)?;
    let kappa0 = kappa_boundary(duct, &problem.datum, problem.eps, &vel, phi)?;
    let kappa = solve_transport(duct, fam, vhat, &kappa0)?;
    let f = curl_data(duct, &kappa, &rho, &vel);
    let pi = solve_pi(duct, fam, &kappa, &f)?;
    let src = CurlSource::corrected(duct, fam, &f, &pi.pi)?;
    let source_divergence = src.divergence_residual(duct, fam);
    let target = problem.entrance_target();
    let dc = solve_divcurl(duct, fam, &src, [&target[0], &target[1]])?;
    // mixed-type correction: sum k_ij d_ij psi + k1 d1 psi = F(vhat) - sum k_ij d_i vdot_j - k1 vdot_1
    let coeffs = mixed::assemble_coefficients(&duct.ext, disc, &vel, phi)?;
    let mut load = mixed::source_f0(&duct.ext, &vel, phi);
    if dc.vdot.max_abs() > 0.0 {
        let d: Vec<Vec<Vec<Vec<f64>>>> = (0..3).map(|i| (0..3).map(|j| dc.vdot.deriv(duct, fam, i, j)).collect()).collect();
        let v1 = values(duct, &fam.cc, &dc.vdot.c[0], 0, 0);
        for (i, row) in load.iter_mut().enumerate() {
            let k1 = coeffs.k1(i);
            for (p, g) in row.iter_mut().enumerate() {
                let k = coeffs.k_at(i, p);
                let mut s = k1 * v1[i][p];
                for a in 0..3 {
                    for b in 0..3 {
                        s += k[slot(a + 1, b + 1)] * d[a][b][i][p];
                    }
                }
                *g -= s;
            }
        }
    }
    let load = disc.project(&load)?;
    let (psi, ladder) = mixed_correction(duct, &coeffs, &load, &problem.ladder)?;
    let mut v = dc.vdot.clone();
    v.axpy(1.0, &ModalVelocity::gradient(duct, fam, &psi)?);
    Ok(Step {
        v,
        kappa,
        pi: pi.pi,
        phi: dc.phi,
        grad_phi: dc.grad_phi,
        psi,
        ladder,
        stream_mismatch: dc.stream_mismatch,
        source_divergence,
        wall_compat: pi.wall_compat,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BeltramiRecord {
    pub k: usize,
    /// Contraction norm of the successive difference.
    pub diff: f64,
    pub ratio: Option<f64>,
    /// `H3(duct)` norm of the iterate.
    pub h3: f64,
    /// `H4(upstream third)` norm of the iterate.
    pub h4_upstream: f64,
    pub kappa_max: f64,
    pub pi_max: f64,
    pub stream_mismatch: f64,
    pub source_divergence: f64,
    pub sigmas_used: usize,
}

/// Pointwise residuals of the steady Euler system for the final state.
#[derive(Debug, Clone, Default, Serialize)]
pub struct BeltramiResiduals {
    /// `|curl u - kappa rho u|` off the wall and the axial ends, and everywhere.
    pub alignment: f64,
    pub alignment_all: f64,
    /// `|grad Pi|`, the part of the alignment defect carried by the auxiliary potential.
    pub grad_pi: f64,
    /// `|div(rho u)|`.
    pub mass: f64,
    pub mass_all: f64,
    /// `|u . grad kappa|`.
    pub transport: f64,
    pub transport_all: f64,
    pub bernoulli: f64,
    pub wall_slip: f64,
    /// `|dn v1|` on the wall.
    pub wall_dn_v1: f64,
    pub entrance: f64,
    pub kappa_wall: f64,
    pub pi_wall: f64,
    pub pi_end_slope: f64,
    /// `|div curl u|`.
    pub div_vorticity: f64,
    /// `|curl grad phi|` for the harmonic part.
    pub curl_grad_phi: f64,
    pub max_vorticity: f64,
    pub max_kappa: f64,
}

#[derive(Debug, Clone)]
pub struct BeltramiState {
    pub eps: f64,
    pub delta1: f64,
    pub v: ModalVelocity,
    /// Full velocity on the duct grid.
    pub u: [Vec<Vec<f64>>; 3],
    pub rho: Vec<Vec<f64>>,
    pub mach2: Vec<Vec<f64>>,
    /// `kappa` transported by the final velocity.
    pub kappa: Vec<Vec<f64>>,
    pub pi: SpectralField,
    pub phi: SpectralField,
    pub psi: SpectralField,
    pub vorticity: [Vec<Vec<f64>>; 3],
    pub history: Vec<BeltramiRecord>,
    pub converged: bool,
    pub ladder: Option<LadderReport>,
    /// Largest `H3(duct)` norm over the iterates.
    pub ball_max: f64,
    pub h4_upstream_max: f64,
    pub residuals: BeltramiResiduals,
}

/// Iterate the map from `vhat = 0` until the contraction norm of the
/// successive difference is below the tolerance.
pub fn beltrami_fixed_point(problem: &BeltramiProblem) -> Result<BeltramiState> {
    let duct = problem.duct;
    let fam = &problem.fam;
    let phi = problem.phi0.scaled(duct, problem.eps);
    let mut vhat = ModalVelocity::zeros(fam, duct.disc.omega_nodes());
    let mut history: Vec<BeltramiRecord> = Vec::new();
    let mut ball_max = 0.0f64;
    let mut h4_max = 0.0f64;
    let mut growth = 0;
    let mut last = None;
    for k in 1..=problem.max_iter {
        let step = beltrami_step(problem, &vhat, &phi)?;
        let h3 = problem.ball_norm(&step.v);
        let h4_upstream = problem.upstream_norm(&step.v);
        ball_max = ball_max.max(h3);
        h4_max = h4_max.max(h4_upstream);
        if h3 > problem.delta1 {
            return Err(Error::BallEscape(format!(
                "iterate {k} has H3 norm {h3:e} > delta1 = {:e}; earlier norms {:?}",
                problem.delta1,
                history.iter().map(|r| r.h3).collect::<Vec<_>>()
            )));
        }
        let mut d = step.v.clone();
        d.axpy(-1.0, &vhat);
        let diff = problem.weak_norm(&d);
        let ratio = history.last().and_then(|r| (r.diff > 0.0).then(|| diff / r.diff));
        growth = if ratio.is_some_and(|r| r > 1.0) { growth + 1 } else { 0 };
        history.push(BeltramiRecord {
            k,
            diff,
            ratio,
            h3,
            h4_upstream,
            kappa_max: step.kappa.iter().flatten().fold(0.0, |m, v| m.max(v.abs())),
            pi_max: step.pi.max_abs(),
            stream_mismatch: step.stream_mismatch,
            source_divergence: step.source_divergence,
            sigmas_used: step.ladder.as_ref().map_or(0, |r| r.sigmas.len()),
        });
        vhat = step.v.clone();
        last = Some(step);
        if diff <= problem.tol {
            break;
        }
        if growth >= 2 {
            return Err(Error::NonContraction(format!(
                "successive differences grew twice in a row: {:?}",
                history.iter().map(|r| r.diff).collect::<Vec<_>>()
            )));
        }
        if k == problem.max_iter {
            return Err(Error::SolverDiverged(format!("no convergence in {} iterations; last difference {diff:e}", problem.max_iter)));
        }
    }
    let step = last.expect("at least one iteration");
    finish(problem, step, &phi, history, [ball_max, h4_max])
}

fn finish(problem: &BeltramiProblem, step: Step, phi: &ScaledPotential, history: Vec<BeltramiRecord>, norms: [f64; 2]) -> Result<BeltramiState> {
    let duct = problem.duct;
    let disc = &duct.disc;
    let cs = &disc.cs;
    let fam = &problem.fam;
    let gas = &duct.gas;
    let no = disc.omega_nodes();
    let np = cs.npts();
    let v = step.v;
    let vel = v.grid(duct, fam);
    let rho = density(duct, &vel, phi)?;
    let kappa0 = kappa_boundary(duct, &problem.datum, problem.eps, &vel, phi)?;
    let kappa = solve_transport(duct, fam, &v, &kappa0)?;
    let mut u = vel.v.clone();
    for i in 0..no {
        let ub = duct.ext.bg.pts[i].u.value();
        for x in u[0][i].iter_mut() {
            *x += ub;
        }
    }
    let w = v.curl(duct, fam);
    let d: Vec<Vec<Vec<Vec<f64>>>> = (0..3).map(|i| (0..3).map(|j| v.deriv(duct, fam, i, j)).collect()).collect();
    let grad_pi = [values(duct, &fam.ss, &step.pi, 1, 0), values(duct, &fam.ss, &step.pi, 0, 1), values(duct, &fam.ss, &step.pi, 0, 2)];
    let pi_grid = values(duct, &fam.ss, &step.pi, 0, 0);
    // derivatives of kappa: 7-point stencils along each grid line
    let st2 = Stencils::new(cs.n2, cs.x2[1] - cs.x2[0], 7, 1);
    let st3 = Stencils::new(cs.n3, cs.x3[1] - cs.x3[0], 7, 1);
    let mut dk = [vec![vec![0.0; np]; no], vec![vec![0.0; np]; no], vec![vec![0.0; np]; no]];
    for p in 0..np {
        let line: Vec<f64> = kappa.iter().map(|r| r[p]).collect();
        for (i, x) in disc.st_omega.apply(1, &line).into_iter().enumerate() {
            dk[0][i][p] = x;
        }
    }
    for i in 0..no {
        for i3 in 0..cs.n3 {
            let line: Vec<f64> = (0..cs.n2).map(|i2| kappa[i][i2 * cs.n3 + i3]).collect();
            for (i2, x) in st2.apply(1, &line).into_iter().enumerate() {
                dk[1][i][i2 * cs.n3 + i3] = x;
            }
        }
        for i2 in 0..cs.n2 {
            let line = &kappa[i][i2 * cs.n3..(i2 + 1) * cs.n3];
            for (i3, x) in st3.apply(1, line).into_iter().enumerate() {
                dk[2][i][i2 * cs.n3 + i3] = x;
            }
        }
    }
    let interior = |i: usize, p: usize| {
        let (i2, i3) = (p / cs.n3, p % cs.n3);
        i > 0 && i + 1 < no && i2 > 0 && i2 + 1 < cs.n2 && i3 > 0 && i3 + 1 < cs.n3
    };
    let mut r = BeltramiResiduals::default();
    let mut mach2 = vec![vec![0.0; np]; no];
    for i in 0..no {
        let bp = &duct.ext.bg.pts[i];
        let (dub, phib, fb) = (bp.u.deriv(1), bp.phi.value(), bp.f.value());
        for p in 0..np {
            let uu = [u[0][i][p], u[1][i][p], u[2][i][p]];
            let q2: f64 = uu.iter().map(|x| x * x).sum();
            let c2 = gas.sound_speed2(rho[i][p]);
            mach2[i][p] = q2 / c2;
            r.bernoulli = r.bernoulli.max((0.5 * q2 + gas.enthalpy(rho[i][p]) - phib - phi.phi[i][p] - gas.b0).abs());
            let du = |a: usize, b: usize| d[a][b][i][p] + if a == 0 && b == 0 { dub } else { 0.0 };
            let div = du(0, 0) + du(1, 1) + du(2, 2);
            let mut conv = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    conv += uu[a] * uu[b] * du(a, b);
                }
            }
            let gphi = [fb + phi.grad[0][i][p], phi.grad[1][i][p], phi.grad[2][i][p]];
            let work: f64 = (0..3).map(|a| uu[a] * gphi[a]).sum();
            let mass = (rho[i][p] / c2 * (c2 * div - conv + work)).abs();
            let k = kappa[i][p];
            let align = (0..3).map(|a| (w[a][i][p] - k * rho[i][p] * uu[a]).abs()).fold(0.0, f64::max);
            let tr = (0..3).map(|a| uu[a] * dk[a][i][p]).sum::<f64>().abs();
            r.mass_all = r.mass_all.max(mass);
            r.alignment_all = r.alignment_all.max(align);
            r.transport_all = r.transport_all.max(tr);
            if interior(i, p) {
                r.mass = r.mass.max(mass);
                r.alignment = r.alignment.max(align);
                r.transport = r.transport.max(tr);
            }
            r.grad_pi = r.grad_pi.max((0..3).map(|a| grad_pi[a][i][p].abs()).fold(0.0, f64::max));
            r.max_vorticity = r.max_vorticity.max((0..3).map(|a| w[a][i][p].abs()).fold(0.0, f64::max));
            r.max_kappa = r.max_kappa.max(k.abs());
        }
    }
    for &(p, _) in &cs.boundary {
        for nrm in cs.edge_normals(p) {
            for i in 0..no {
                r.wall_slip = r.wall_slip.max((nrm[0] * u[1][i][p] + nrm[1] * u[2][i][p]).abs());
                r.wall_dn_v1 = r.wall_dn_v1.max((nrm[0] * d[1][0][i][p] + nrm[1] * d[2][0][i][p]).abs());
            }
        }
        for i in 0..no {
            r.kappa_wall = r.kappa_wall.max(kappa[i][p].abs());
            r.pi_wall = r.pi_wall.max(pi_grid[i][p].abs());
        }
    }
    for i in [0, no - 1] {
        r.pi_end_slope = r.pi_end_slope.max(grad_pi[0][i].iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    let target = problem.entrance_target();
    for p in 0..np {
        r.entrance = r.entrance.max((u[1][0][p] - target[0][p]).abs()).max((u[2][0][p] - target[1][p]).abs());
    }
    r.div_vorticity = vorticity_divergence(duct, fam, &v)?;
    let cg = step.grad_phi.curl(duct, fam);
    r.curl_grad_phi = cg.iter().flatten().flatten().fold(0.0, |m, x| m.max(x.abs()));
    Ok(BeltramiState {
        eps: problem.eps,
        delta1: problem.delta1,
        v,
        u,
        rho,
        mach2,
        kappa,
        pi: step.pi,
        phi: step.phi,
        psi: step.psi,
        vorticity: w,
        history,
        converged: true,
        ladder: step.ladder,
        ball_max: norms[0],
        h4_upstream_max: norms[1],
        residuals: r,
    })
}

/// `max |div curl v|`, with the vorticity expanded in its own families
/// (Dirichlet, cos-sin, sin-cos) so every derivative is exact across the section.
pub fn vorticity_divergence(duct: &Duct, fam: &Families, v: &ModalVelocity) -> Result<f64> {
    use super::fields::project;
    let w = v.curl(duct, fam);
    let w1 = project(duct, &fam.ss, &w[0])?;
    let w2 = project(duct, &fam.cs, &w[1])?;
    let w3 = project(duct, &fam.sc, &w[2])?;
    let a = values(duct, &fam.ss, &w1, 1, 0);
    let b = values(duct, &fam.cs, &w2, 0, 1);
    let c = values(duct, &fam.sc, &w3, 0, 2);
    let mut worst = 0.0f64;
    for i in 0..a.len() {
        for p in 0..a[i].len() {
            worst = worst.max((a[i][p] + b[i][p] + c[i][p]).abs());
        }
    }
    Ok(worst)
}

impl BeltramiState {
    pub fn sonic_surface(&self, duct: &Duct) -> Result<SonicSurface> {
        sonic_surface(duct, &self.mach2)
    }

    /// `|M|^2 - 1` on the located sonic surface, recomputed off the grid.
    pub fn sonic_check(&self, problem: &BeltramiProblem, surf: &SonicSurface) -> Result<f64> {
        sonic_check_velocity(problem.duct, problem.eps, &problem.phi0, &self.u, surf)
    }

    /// `x1,x2,x3,u1,u2,u3,rho,M2,kappa,Pi,w1,w2,w3` at every duct node.
    pub fn write_fields_csv<W: Write>(&self, duct: &Duct, fam: &Families, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x1,x2,x3,u1,u2,u3,rho,M2,kappa,Pi,w1,w2,w3")?;
        let pi = values(duct, &fam.ss, &self.pi, 0, 0);
        let x = duct.disc.grid.omega_x();
        for (i, &x1) in x.iter().enumerate() {
            for p in 0..duct.disc.cs.npts() {
                let (x2, x3) = duct.disc.cs.point(p);
                writeln!(
                    w,
                    "{x1:.10e},{x2:.10e},{x3:.10e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.u[0][i][p],
                    self.u[1][i][p],
                    self.u[2][i][p],
                    self.rho[i][p],
                    self.mach2[i][p],
                    self.kappa[i][p],
                    pi[i][p],
                    self.vorticity[0][i][p],
                    self.vorticity[1][i][p],
                    self.vorticity[2][i][p]
                )?;
            }
        }
        Ok(())
    }

    /// Iteration log and final diagnostics as `key = value` lines.
    pub fn iteration_log(&self) -> String {
        let mut s = format!("eps = {:e}\ndelta1 = {:e}\niterations = {}\nconverged = {}\n", self.eps, self.delta1, self.history.len(), self.converged);
        for r in &self.history {
            let k = r.k;
            s.push_str(&format!(
                "iter{k}.diff = {:e}\niter{k}.ratio = {}\niter{k}.h3 = {:e}\niter{k}.h4_upstream = {:e}\niter{k}.kappa_max = {:e}\niter{k}.pi_max = {:e}\niter{k}.stream_mismatch = {:e}\niter{k}.source_divergence = {:e}\n",
                r.diff,
                r.ratio.map_or("none".to_string(), |v| format!("{v:e}")),
                r.h3,
                r.h4_upstream,
                r.kappa_max,
                r.pi_max,
                r.stream_mismatch,
                r.source_divergence
            ));
        }
        s.push_str(&format!("ball_max = {:e}\nh4_upstream_max = {:e}\n", self.ball_max, self.h4_upstream_max));
        if let serde_json::Value::Object(map) = serde_json::to_value(&self.residuals).expect("plain numeric report") {
            for (k, v) in map {
                s.push_str(&format!("residual.{k} = {v}\n"));
            }
        }
        if let Some(l) = &self.ladder {
            s.push_str(&format!("sigma_floor = {:e}\nsigmas = {:?}\nskipped = {:?}\n", l.sigma_floor, l.sigmas, l.skipped));
        }
        s
    }
}
