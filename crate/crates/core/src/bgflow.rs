//! One-dimensional accelerating transonic background flow driven by an
//! axial external force, its extension past the duct exit, and the
//! structural inequalities the mixed-type solver relies on.
//!
//! The state at each node is obtained algebraically from mass-flux and
//! Bernoulli conservation. Near the sonic point the Bernoulli relation is
//! rewritten in the regular form `s sqrt(Q(s)) = x sqrt(R(x))` with
//! `s = u - u*`, so all derivatives stay analytic through `x1 = 0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::quad;

/// Polytropic gas and entry state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasConstants {
    pub gamma: f64,
    pub rho0: f64,
    pub u0: f64,
    pub b0: f64,
    pub mass_flux: f64,
}

impl GasConstants {
    pub fn new(gamma: f64, rho0: f64, u0: f64) -> Result<Self> {
        if !(gamma > 1.0 && rho0 > 0.0 && u0 > 0.0) {
            return Err(Error::InadmissibleData(format!("need gamma > 1, rho0 > 0, u0 > 0; got {gamma}, {rho0}, {u0}")));
        }
        if u0 * u0 >= gamma * rho0.powf(gamma - 1.0) {
            return Err(Error::InadmissibleData("entry state is not subsonic".into()));
        }
        let b0 = 0.5 * u0 * u0 + gamma / (gamma - 1.0) * rho0.powf(gamma - 1.0);
        Ok(GasConstants { gamma, rho0, u0, b0, mass_flux: rho0 * u0 })
    }

    pub fn enthalpy(&self, rho: f64) -> f64 {
        self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0)
    }

    pub fn sound_speed2(&self, rho: f64) -> f64 {
        self.gamma * rho.powf(self.gamma - 1.0)
    }

    /// Critical (sonic) density and speed for this mass flux.
    pub fn sonic_state(&self) -> (f64, f64) {
        let rho = (self.mass_flux / self.gamma.sqrt()).powf(2.0 / (self.gamma + 1.0));
        (rho, self.mass_flux / rho)
    }

    /// Minimum of `u^2/2 + h(m/u)` over `u`, attained at the sonic speed.
    pub fn sonic_bernoulli(&self) -> f64 {
        let g = self.gamma;
        (g + 1.0) / (2.0 * (g - 1.0)) * g.powf(2.0 / (g + 1.0)) * self.mass_flux.powf(2.0 * (g - 1.0) / (g + 1.0))
    }

    /// The value `\int_{L0}^0 f` must take for the flow to reach sonic speed at `x1 = 0`.
    pub fn required_force_integral(&self) -> f64 {
        self.sonic_bernoulli() - self.b0
    }

    /// `((g-1)/g)^(1/(g-1)) * q^(1/(g-1))`: density from the enthalpy budget `q = B0 + Phi - |u|^2/2`.
    pub fn density_from_budget(&self, q: f64) -> f64 {
        let g = self.gamma;
        ((g - 1.0) / g * q).powf(1.0 / (g - 1.0))
    }
}

/// Smooth compactly supported bump with peak 1 at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
}

impl Bump {
    pub fn eval_jet(&self, x: Jet) -> Jet {
        let s = (x - self.center) / self.radius;
        let s0 = s.value();
        if s0.abs() >= 0.995 {
            return Jet::constant(0.0);
        }
        let w = Jet::constant(1.0) - s * s;
        (Jet::constant(1.0) - w.recip()).exp()
    }

    /// Scalar path of `eval_jet`, same operations without the derivatives.
    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.radius;
        if s.abs() >= 0.995 {
            return 0.0;
        }
        (1.0 - (1.0 - s * s).recip()).exp()
    }

    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }
}

/// Force template `f(x) = slope * x * (1 + alpha B_-(x) + amp_+ B_+(x))`.
///
/// Bump positions are given as fractions of `L0` (negative lobe) and `L1`
/// (positive lobe).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForceShape {
    pub slope: f64,
    pub neg_center: f64,
    pub neg_radius: f64,
    pub pos_amp: f64,
    pub pos_center: f64,
    pub pos_radius: f64,
}

impl Default for ForceShape {
    fn default() -> Self {
        ForceShape { slope: 1.0, neg_center: 0.6, neg_radius: 0.3, pos_amp: 0.0, pos_center: 1.0, pos_radius: 0.5 }
    }
}

/// Axial external force `f = Phi'` on `[L0, L2]`.
#[derive(Debug, Clone)]
pub struct ExternalForce {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub slope: f64,
    /// Negative-lobe bump and its solved amplitude.
    pub neg: (Bump, f64),
    pub pos: (Bump, f64),
    /// Target of `\int_{L0}^0 f`.
    pub required_integral: f64,
    rule: (Vec<f64>, Vec<f64>),
}

impl ExternalForce {
    pub fn f_jet(&self, x: Jet) -> Jet {
        let g = Jet::constant(1.0) + self.neg.0.eval_jet(x) * self.neg.1 + self.pos.0.eval_jet(x) * self.pos.1;
        x * g * self.slope
    }

    pub fn f(&self, x: f64) -> f64 {
        self.f_jet(Jet::constant(x)).value()
    }

    /// `\int_{L0}^x t B(t) dt` for one bump.
    fn bump_moment(&self, b: &Bump, x: f64) -> f64 {
        let lo = b.lo().max(self.l0);
        let hi = b.hi().min(x);
        if hi <= lo {
            return 0.0;
        }
        quad::integrate(|t| t * b.eval(t), lo, hi, 24, &self.rule)
    }

    /// `Phi(x) = \int_{L0}^x f`.
    pub fn phi(&self, x: f64) -> f64 {
        let base = 0.5 * (x * x - self.l0 * self.l0);
        self.slope * (base + self.neg.1 * self.bump_moment(&self.neg.0, x) + self.pos.1 * self.bump_moment(&self.pos.0, x))
    }

    pub fn phi_jet(&self, x0: f64) -> Jet {
        self.f_jet(Jet::variable(x0)).integrate(self.phi(x0))
    }

    /// Interval around 0 on which `f = slope * x` exactly.
    pub fn linear_zone(&self) -> (f64, f64) {
        (self.neg.0.hi(), self.pos.0.lo())
    }

    pub fn integral_to_zero(&self) -> f64 {
        self.phi(0.0)
    }
}

/// Scale the negative lobe so that `\int_{L0}^0 f` hits the sonic requirement.
pub fn make_admissible_force(gas: &GasConstants, l0: f64, l1: f64, shape: &ForceShape) -> Result<ExternalForce> {
    let required = gas.required_force_integral();
    if required >= 0.0 {
        return Err(Error::InadmissibleData(format!(
            "required force integral {required} is nonnegative: entry state already critical"
        )));
    }
    if !(l0 < 0.0 && l1 > 0.0) {
        return Err(Error::InvalidGeometry(format!("need L0 < 0 < L1, got {l0}, {l1}")));
    }
    if !(shape.slope > 0.0) {
        return Err(Error::InadmissibleData("force slope at the sonic point must be positive".into()));
    }
    let neg = Bump { center: shape.neg_center * l0, radius: shape.neg_radius * l0.abs() };
    let pos = Bump { center: shape.pos_center * l1, radius: shape.pos_radius * l1 };
    if neg.hi() >= 0.0 || neg.lo() < l0 - 1e-12 || pos.lo() <= 0.0 {
        return Err(Error::InadmissibleData("force bumps must stay inside their lobes and away from x1 = 0".into()));
    }
    if shape.pos_amp <= -1.0 {
        return Err(Error::InadmissibleData("positive-lobe amplitude must exceed -1".into()));
    }
    let mut force = ExternalForce {
        l0,
        l1,
        l2: 2.0 * l1,
        slope: shape.slope,
        neg: (neg, 0.0),
        pos: (pos, shape.pos_amp),
        required_integral: required,
        rule: quad::gauss_legendre(20),
    };
    // Newton on the negative-lobe amplitude; the map is affine so two steps suffice.
    let moment = force.bump_moment(&neg, 0.0);
    if moment == 0.0 {
        return Err(Error::InadmissibleData("negative-lobe bump has no weight".into()));
    }
    let mut alpha = 0.0;
    for _ in 0..4 {
        force.neg.1 = alpha;
        let r = force.integral_to_zero() - required;
        if r.abs() < 1e-15 {
            break;
        }
        alpha -= r / (shape.slope * moment);
    }
    force.neg.1 = alpha;
    if alpha <= -1.0 {
        return Err(Error::InadmissibleData(format!(
            "negative lobe would need amplitude {alpha} <= -1 and change sign; reduce the slope"
        )));
    }
    check_sign_pattern(&force)?;
    Ok(force)
}

fn check_sign_pattern(force: &ExternalForce) -> Result<()> {
    let n = 4000;
    for i in 0..=n {
        let x = force.l0 + (force.l2 - force.l0) * i as f64 / n as f64;
        let f = force.f(x);
        let ok = if x < 0.0 { f < 0.0 } else if x > 0.0 { f > 0.0 } else { f == 0.0 };
        if !ok {
            return Err(Error::InadmissibleData(format!("force sign pattern fails at x1 = {x}: f = {f}")));
        }
    }
    Ok(())
}

/// Background state at one axial position, each entry a Taylor jet in `x1`.
#[derive(Debug, Clone, Copy)]
pub struct BgPoint {
    pub x: f64,
    pub rho: Jet,
    pub u: Jet,
    pub c2: Jet,
    pub m2: Jet,
    pub k11: Jet,
    pub k1: Jet,
    pub f: Jet,
    pub phi: Jet,
}

/// Bernoulli deficit `g(u*+s) - g*` divided by `s^2`, regular at `s = 0`.
struct RegularBernoulli {
    ustar: f64,
    series: Vec<f64>,
    k: f64,
    p: f64,
    gstar: f64,
}

impl RegularBernoulli {
    fn new(gas: &GasConstants) -> Self {
        let g = gas.gamma;
        let (_, ustar) = gas.sonic_state();
        let k = g / (g - 1.0) * gas.mass_flux.powf(g - 1.0);
        let p = 1.0 - g;
        // coefficients of s^(k-2), k >= 2, in the Taylor series of g(u*+s) - g*
        let mut series = Vec::new();
        let mut binom = p * (p - 1.0) / 2.0;
        for kk in 2..60 {
            let mut c = k * ustar.powf(p - kk as f64) * binom;
            if kk == 2 {
                c += 0.5;
            }
            series.push(c);
            binom *= (p - kk as f64) / (kk as f64 + 1.0);
        }
        let gstar = 0.5 * ustar * ustar + k * ustar.powf(p);
        RegularBernoulli { ustar, series, k, p, gstar }
    }

    fn q(&self, s: Jet) -> Jet {
        if s.value().abs() <= 0.2 * self.ustar {
            let mut acc = Jet::constant(0.0);
            for &c in self.series.iter().rev() {
                acc = acc * s + c;
            }
            acc
        } else {
            let u = s + self.ustar;
            let g = u * u * 0.5 + u.powf(self.p) * self.k;
            (g - self.gstar) / (s * s)
        }
    }

    /// `sign(s) sqrt(g(u*+s) - g*)`, strictly increasing in `s`.
    fn s_map(&self, s: Jet) -> Jet {
        s * self.q(s).sqrt()
    }
}

/// Sampled background flow.
#[derive(Debug, Clone)]
pub struct BackgroundFlow {
    pub gas: GasConstants,
    pub force: ExternalForce,
    pub x: Vec<f64>,
    pub pts: Vec<BgPoint>,
}

/// Evaluate the background state at a single position.
pub fn background_point(gas: &GasConstants, force: &ExternalForce, x: f64) -> Result<BgPoint> {
    let rb = RegularBernoulli::new(gas);
    background_point_with(gas, force, &rb, x)
}

fn background_point_with(gas: &GasConstants, force: &ExternalForce, rb: &RegularBernoulli, x: f64) -> Result<BgPoint> {
    let xj = Jet::variable(x);
    let phi = force.phi_jet(x);
    let (zlo, zhi) = force.linear_zone();
    // right-hand side y(x) = sign(x) sqrt(B0 + Phi - g*)
    let y = if x > 0.5 * zlo && x < 0.5 * zhi {
        xj * (0.5 * force.slope).sqrt()
    } else {
        let d = phi + (gas.b0 - rb.gstar);
        if d.value() <= 0.0 {
            return Err(Error::SolverDiverged(format!("no real state at x1 = {x}: Bernoulli budget below critical")));
        }
        let r = d.sqrt();
        if x < 0.0 {
            -r
        } else {
            r
        }
    };
    // scalar Newton with bisection safeguard on the monotone map
    let y0 = y.value();
    let mut lo = -rb.ustar * (1.0 - 1e-14);
    let mut hi = rb.ustar;
    while rb.s_map(Jet::constant(hi)).value() < y0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::SolverDiverged(format!("supersonic branch not bracketed at x1 = {x}")));
        }
    }
    let mut s = y0 / rb.series[0].sqrt();
    if !(s > lo && s < hi) {
        s = 0.5 * (lo + hi);
    }
    let mut converged = false;
    for _ in 0..200 {
        let sj = rb.s_map(Jet::variable(s));
        let r = sj.value() - y0;
        if r > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let mut next = s - r / sj.deriv(1);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - s).abs();
        s = next;
        if step <= 1e-15 * (1.0 + s.abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SolverDiverged(format!("Bernoulli Newton did not converge at x1 = {x}")));
    }
    if (x < 0.0 && s >= 0.0) || (x > 0.0 && s <= 0.0) {
        return Err(Error::SolverDiverged(format!("branch ambiguity at x1 = {x}")));
    }
    // lift to Taylor jets: each pass fixes one more coefficient
    let slope = rb.s_map(Jet::variable(s)).deriv(1);
    let mut sj = Jet::constant(s);
    sj.c[1] = y.c[1] / slope;
    for _ in 0..crate::jet::ORDER + 1 {
        let r = rb.s_map(sj) - y;
        let mut corr = r / slope;
        corr.c[0] = 0.0;
        sj = sj - corr;
    }
    let g = gas.gamma;
    let u = sj + rb.ustar;
    let rho = u.recip() * gas.mass_flux;
    let c2 = rho.powf(g - 1.0) * g;
    let m2 = u * u / c2;
    let k11 = Jet::constant(1.0) - m2;
    let f = force.f_jet(xj);
    let du = u.differentiate();
    let k1 = (f - u * du * (g + 1.0)) / c2;
    Ok(BgPoint { x, rho, u, c2, m2, k11, k1, f, phi })
}

/// Background flow on the given axial nodes.
pub fn solve_background(gas: &GasConstants, force: &ExternalForce, xs: &[f64]) -> Result<BackgroundFlow> {
    let rb = RegularBernoulli::new(gas);
    let pts = xs.iter().map(|&x| background_point_with(gas, force, &rb, x)).collect::<Result<Vec<_>>>()?;
    Ok(BackgroundFlow { gas: *gas, force: force.clone(), x: xs.to_vec(), pts })
}

impl BackgroundFlow {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn at(&self, x: f64) -> Result<BgPoint> {
        background_point(&self.gas, &self.force, x)
    }

    pub fn column(&self, f: impl Fn(&BgPoint) -> f64) -> Vec<f64> {
        self.pts.iter().map(f).collect()
    }

    /// Max node deviation of `rho u` from the mass flux.
    pub fn mass_flux_defect(&self) -> f64 {
        self.pts.iter().map(|p| (p.rho.value() * p.u.value() - self.gas.mass_flux).abs()).fold(0.0, f64::max)
    }

    /// Max node deviation of `u^2/2 + h(rho) - Phi` from `B0`.
    pub fn bernoulli_defect(&self) -> f64 {
        self.pts
            .iter()
            .map(|p| {
                let u = p.u.value();
                (0.5 * u * u + self.gas.enthalpy(p.rho.value()) - p.phi.value() - self.gas.b0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Number of sign changes of `k11` between consecutive nodes (zeros skipped).
    pub fn sonic_crossings(&self) -> usize {
        let signs: Vec<f64> = self.pts.iter().map(|p| p.k11.value()).filter(|v| *v != 0.0).collect();
        signs.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
    }

    /// Profile table with columns x1, rho, u, c2, M2, k11, k1, f, Phi.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x1,rho,u,c2,M2,k11,k1,f,Phi")?;
        for p in &self.pts {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.x,
                p.rho.value(),
                p.u.value(),
                p.c2.value(),
                p.m2.value(),
                p.k11.value(),
                p.k1.value(),
                p.f.value(),
                p.phi.value()
            )?;
        }
        Ok(())
    }
}

/// Closed-form slope of the background Mach number squared at the sonic point.
pub fn sonic_mach_slope(gas: &GasConstants, fprime0: f64) -> f64 {
    let g = gas.gamma;
    g.powf(-1.0 / (g + 1.0)) * gas.mass_flux.powf(-(g - 1.0) / (g + 1.0)) * ((g + 1.0) * fprime0).sqrt()
}

/// Background coefficients continued to `[L0, L2]` by the blending cutoffs.
#[derive(Debug, Clone)]
pub struct ExtendedBackground {
    pub bg: BackgroundFlow,
    pub k0: f64,
    pub d0: f64,
    /// Blended leading coefficient.
    pub a11: Vec<Jet>,
    /// Blended first-order coefficient.
    pub a1: Vec<Jet>,
    pub zeta1: Vec<Jet>,
    pub zeta2: Vec<Jet>,
}

impl ExtendedBackground {
    /// Multiplier `d(x1) = 6 (x1 - d0)`.
    pub fn d(&self, x: f64) -> f64 {
        6.0 * (x - self.d0)
    }
}

/// Blend the background coefficients into the exit region `(L1, L2]` where
/// they become `a11 = 1`, `a1 = -k0`.
pub fn extend_background(bg: &BackgroundFlow, xs: &[f64], k0: f64, d0: f64) -> Result<ExtendedBackground> {
    Ok(blend(extended_profile(bg, xs)?, k0, d0))
}

/// Background state on `xs`, which may reach past `L1` into the region where
/// the force stays positive.
fn extended_profile(bg: &BackgroundFlow, xs: &[f64]) -> Result<BackgroundFlow> {
    let force = &bg.force;
    for &x in xs {
        if x > 0.0 && force.f(x) <= 0.0 {
            return Err(Error::InadmissibleData(format!("extended force not positive at x1 = {x}")));
        }
    }
    solve_background(&bg.gas, force, xs)
}

fn blend(ext: BackgroundFlow, k0: f64, d0: f64) -> ExtendedBackground {
    let z1 = Cutoff::Zeta1 { l1: ext.force.l1 };
    let z2 = Cutoff::Zeta2 { l1: ext.force.l1 };
    let n = ext.pts.len();
    let (mut a11, mut a1, mut zeta1, mut zeta2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for p in &ext.pts {
        let x = Jet::variable(p.x);
        let s1 = z1.eval_jet(x);
        let s2 = z2.eval_jet(x);
        a11.push(p.k11 * s1 + (Jet::constant(1.0) - s1));
        a1.push(p.k1 * s2 - (Jet::constant(1.0) - s2) * k0);
        zeta1.push(s1);
        zeta2.push(s2);
    }
    ExtendedBackground { bg: ext, k0, d0, a11, a1, zeta1, zeta2 }
}

/// Constants and margins certifying the multiplier inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    pub kappa_star: f64,
    pub d0: f64,
    pub k0: f64,
    /// min over nodes and j of `-(2 k1 + (2j-1) k11') - kappa_star` on `[L0, L1]`.
    pub margin_sign: f64,
    /// min over nodes and j of `(k1 + j k11') d - (k11 d)'/2 - 4` on `[L0, L1]`.
    pub margin_multiplier: f64,
    /// Same as `margin_sign` for the blended coefficients on `[L0, L2]`, j <= 4.
    pub margin_sign_ext: f64,
    /// Same as `margin_multiplier` for the blended coefficients, j <= 3.
    pub margin_multiplier_ext: f64,
}

/// `max_j (2 a1 + (2j-1) a11')` and `min_j [(a1 + j a11') d - (a11 d)'/2]` at one node.
fn node_terms(a11: &Jet, a1: &Jet, x: f64, d0: f64, jmax_sign: usize, jmax_mult: usize) -> (f64, f64, usize, usize) {
    let (a, da, b) = (a11.deriv(0), a11.deriv(1), a1.deriv(0));
    let d = 6.0 * (x - d0);
    let mut worst_sign = f64::NEG_INFINITY;
    let mut js = 0;
    for j in 0..=jmax_sign {
        let v = 2.0 * b + (2.0 * j as f64 - 1.0) * da;
        if v > worst_sign {
            worst_sign = v;
            js = j;
        }
    }
    let mut worst_mult = f64::INFINITY;
    let mut jm = 0;
    for j in 0..=jmax_mult {
        // (a1 + j a11') d - (a11' d + 6 a11)/2
        let v = (b + j as f64 * da) * d - 0.5 * (da * d + 6.0 * a);
        if v < worst_mult {
            worst_mult = v;
            jm = j;
        }
    }
    (worst_sign, worst_mult, js, jm)
}

/// Largest admissible `kappa_star` and smallest `d0`, `k0` on geometric ladders.
///
/// `bg` is sampled on `[L0, L1]`; `ext_xs` are nodes on `[L0, L2]`.
pub fn verify_admissibility(bg: &BackgroundFlow, ext_xs: &[f64]) -> Result<Admissibility> {
    let l2 = bg.force.l2;
    // Sign inequality on the physical duct.
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = (0.0, 0);
    for p in &bg.pts {
        let (s, _, j, _) = node_terms(&p.k11, &p.k1, p.x, 0.0, 3, 3);
        if s > worst {
            worst = s;
            worst_at = (p.x, j);
        }
    }
    if worst >= 0.0 {
        return Err(Error::AdmissibilityViolation {
            x1: worst_at.0,
            j: worst_at.1,
            detail: format!("2k1 + (2j-1)k11' = {worst} is not negative"),
        });
    }
    let kappa_base = -worst;

    let d0_ladder: Vec<f64> = (0..40).map(|k| l2 + 0.125 * 2f64.powi(k) * (l2 - bg.force.l0) / 8.0).collect();
    let mult_margin = |a11: &[Jet], a1: &[Jet], xs: &[f64], d0: f64, jm: usize| -> (f64, f64, usize) {
        let mut m = f64::INFINITY;
        let mut at = (0.0, 0);
        for ((p, q), &x) in a11.iter().zip(a1).zip(xs) {
            let (_, v, _, j) = node_terms(p, q, x, d0, 0, jm);
            if v < m {
                m = v;
                at = (x, j);
            }
        }
        (m - 4.0, at.0, at.1)
    };

    let k11s: Vec<Jet> = bg.pts.iter().map(|p| p.k11).collect();
    let k1s: Vec<Jet> = bg.pts.iter().map(|p| p.k1).collect();
    let d0_base = d0_ladder
        .iter()
        .copied()
        .find(|&d0| mult_margin(&k11s, &k1s, &bg.x, d0, 3).0 >= 0.0)
        .ok_or_else(|| {
            let (m, x, j) = mult_margin(&k11s, &k1s, &bg.x, *d0_ladder.last().unwrap(), 3);
            Error::AdmissibilityViolation { x1: x, j, detail: format!("multiplier inequality short by {}", -m) }
        })?;

    // Blended coefficients: search k0, then d0.
    let profile = extended_profile(bg, ext_xs)?;
    let mut last_err = None;
    for kk in 0..30 {
        let k0 = 2f64.powi(kk);
        let ext = blend(profile.clone(), k0, 0.0);
        let mut worst_ext = f64::NEG_INFINITY;
        let mut at = (0.0, 0);
        for ((p, q), &x) in ext.a11.iter().zip(&ext.a1).zip(ext_xs) {
            let (s, _, j, _) = node_terms(p, q, x, 0.0, 4, 0);
            if s > worst_ext {
                worst_ext = s;
                at = (x, j);
            }
        }
        if worst_ext >= 0.0 {
            last_err = Some(Error::AdmissibilityViolation { x1: at.0, j: at.1, detail: format!("blended sign inequality {worst_ext}") });
            continue;
        }
        let found = d0_ladder.iter().copied().filter(|&d| d >= d0_base).find(|&d0| mult_margin(&ext.a11, &ext.a1, ext_xs, d0, 3).0 >= 0.0);
        let Some(d0) = found else {
            let (m, x, j) = mult_margin(&ext.a11, &ext.a1, ext_xs, *d0_ladder.last().unwrap(), 3);
            last_err = Some(Error::AdmissibilityViolation { x1: x, j, detail: format!("blended multiplier inequality short by {}", -m) });
            continue;
        };
        let kappa_star = kappa_base.min(-worst_ext);
        let mut margin_sign = f64::INFINITY;
        for p in &bg.pts {
            let (s, _, _, _) = node_terms(&p.k11, &p.k1, p.x, d0, 3, 3);
            margin_sign = margin_sign.min(-s - kappa_star);
        }
        let mut margin_sign_ext = f64::INFINITY;
        for (p, q) in ext.a11.iter().zip(&ext.a1) {
            let (s, _, _, _) = node_terms(p, q, 0.0, d0, 4, 0);
            margin_sign_ext = margin_sign_ext.min(-s - kappa_star);
        }
        return Ok(Admissibility {
            kappa_star,
            d0,
            k0,
            margin_sign,
            margin_multiplier: mult_margin(&k11s, &k1s, &bg.x, d0, 3).0,
            margin_sign_ext,
            margin_multiplier_ext: mult_margin(&ext.a11, &ext.a1, ext_xs, d0, 3).0,
        });
    }
    Err(last_err.unwrap_or_else(|| Error::AdmissibilityViolation { x1: l2, j: 0, detail: "no k0 found".into() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> (GasConstants, ExternalForce) {
        let gas = GasConstants::new(2.0, 1.0, 0.5).unwrap();
        let force = make_admissible_force(&gas, -1.0, 0.5, &ForceShape::default()).unwrap();
        (gas, force)
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn required_integral_closed_form() {
        let gas = GasConstants::new(2.0, 1.0, 0.5).unwrap();
        assert!((gas.sonic_bernoulli() - 1.5).abs() < 1e-15);
        assert!((gas.b0 - 2.125).abs() < 1e-15);
        assert!((gas.required_force_integral() + 0.625).abs() < 1e-15);
    }

    #[test]
    fn critical_entry_is_rejected() {
        // u0 = c0 exactly would not even be subsonic; pick a state whose
        // Bernoulli constant already equals the critical value
        let g = 2.0;
        let gas = GasConstants { gamma: g, rho0: 0.5, u0: 1.0 - 1e-9, b0: 0.0, mass_flux: 0.5 };
        let gas = GasConstants { b0: gas.sonic_bernoulli(), ..gas };
        assert!(matches!(make_admissible_force(&gas, -1.0, 0.5, &ForceShape::default()), Err(Error::InadmissibleData(_))));
    }

    #[test]
    fn force_integral_and_sign_pattern() {
        let (_, force) = example();
        assert!((force.integral_to_zero() + 0.625).abs() < 1e-12);
        assert_eq!(force.f(0.0), 0.0);
        for x in linspace(-1.0, 1.0, 2001) {
            let f = force.f(x);
            assert!(if x < 0.0 { f < 0.0 } else if x > 0.0 { f > 0.0 } else { true });
        }
    }

    #[test]
    fn moment_quadrature_converged() {
        let (_, force) = example();
        let b = force.neg.0;
        let fine = quad::integrate(|t| t * b.eval(t), b.lo(), b.hi(), 200, &quad::gauss_legendre(20));
        assert!((force.bump_moment(&b, 0.0) - fine).abs() < 1e-14);
    }

    #[test]
    fn positive_lobe_scaling_keeps_negative_integral() {
        let gas = GasConstants::new(2.0, 1.0, 0.5).unwrap();
        let a = make_admissible_force(&gas, -1.0, 0.5, &ForceShape::default()).unwrap();
        let b = make_admissible_force(&gas, -1.0, 0.5, &ForceShape { pos_amp: 1.0, ..Default::default() }).unwrap();
        assert_eq!(a.neg.1, b.neg.1);
        assert!((a.integral_to_zero() - b.integral_to_zero()).abs() < 1e-15);
    }

    #[test]
    fn sonic_state_and_conservation() {
        let (gas, force) = example();
        let bg = solve_background(&gas, &force, &linspace(-1.0, 0.5, 1001)).unwrap();
        let s = bg.at(0.0).unwrap();
        assert!((s.rho.value() - 0.5).abs() < 1e-12);
        assert!((s.u.value() - 1.0).abs() < 1e-12);
        assert!(bg.mass_flux_defect() < 1e-12);
        assert!(bg.bernoulli_defect() < 1e-12);
        assert_eq!(bg.sonic_crossings(), 1);
        assert!(s.k11.deriv(1) < 0.0);
    }

    #[test]
    fn sonic_mach_slope_limit() {
        let (gas, force) = example();
        let s = background_point(&gas, &force, 0.0).unwrap();
        let want = sonic_mach_slope(&gas, force.f_jet(Jet::variable(0.0)).deriv(1));
        assert!((s.m2.deriv(1) - want).abs() < 1e-10);
        assert!(want > 0.0);
    }

    #[test]
    fn jets_match_difference_quotients() {
        let (gas, force) = example();
        for &x in &[-0.6, -0.05, 0.0, 0.03, 0.4] {
            let h = 1e-4;
            let p = |x| background_point(&gas, &force, x).unwrap();
            let (a, b, c) = (p(x - h), p(x), p(x + h));
            let fd2 = (a.k11.value() - 2.0 * b.k11.value() + c.k11.value()) / (h * h);
            assert!((fd2 - b.k11.deriv(2)).abs() < 1e-5 * (1.0 + fd2.abs()), "x = {x}");
            let fd1 = (c.k1.value() - a.k1.value()) / (2.0 * h);
            assert!((fd1 - b.k1.deriv(1)).abs() < 1e-5 * (1.0 + fd1.abs()), "x = {x}");
        }
    }

    /// Independent oracle: RK4 on u' = f u / (u^2 - c^2) from the entrance.
    #[test]
    fn newton_branch_agrees_with_ode_integration() {
        let (gas, force) = example();
        let rhs = |x: f64, u: f64| {
            let rho = gas.mass_flux / u;
            let c2 = gas.sound_speed2(rho);
            force.f(x) * u / (u * u - c2)
        };
        let n = 20000;
        let (a, b) = (-1.0, -0.2);
        let h = (b - a) / n as f64;
        let mut u = gas.u0;
        let mut x = a;
        for _ in 0..n {
            let k1 = rhs(x, u);
            let k2 = rhs(x + 0.5 * h, u + 0.5 * h * k1);
            let k3 = rhs(x + 0.5 * h, u + 0.5 * h * k2);
            let k4 = rhs(x + h, u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            x += h;
        }
        let p = background_point(&gas, &force, b).unwrap();
        assert!((p.u.value() - u).abs() < 1e-8, "{} vs {}", p.u.value(), u);
        // supersonic side, integrating forward from x1 = 0.2
        let start = background_point(&gas, &force, 0.2).unwrap();
        let (a, b) = (0.2, 0.9);
        let h = (b - a) / n as f64;
        let (mut u, mut x) = (start.u.value(), a);
        for _ in 0..n {
            let k1 = rhs(x, u);
            let k2 = rhs(x + 0.5 * h, u + 0.5 * h * k1);
            let k3 = rhs(x + 0.5 * h, u + 0.5 * h * k2);
            let k4 = rhs(x + h, u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            x += h;
        }
        let p = background_point(&gas, &force, b).unwrap();
        assert!((p.u.value() - u).abs() < 1e-8);
    }

    #[test]
    fn extension_blends_to_exit_values() {
        let (gas, force) = example();
        let bg = solve_background(&gas, &force, &linspace(-1.0, 0.5, 301)).unwrap();
        let xs = linspace(-1.0, 1.0, 401);
        let ext = extend_background(&bg, &xs, 50.0, 2.0).unwrap();
        let ell = 0.5 / 20.0;
        for (i, &x) in xs.iter().enumerate() {
            if x >= 0.5 + 4.0 * ell {
                assert_eq!(ext.a11[i].value(), 1.0);
                assert_eq!(ext.a1[i].value(), -50.0);
            }
            if x <= 0.5 + ell {
                assert!((ext.a1[i].value() - ext.bg.pts[i].k1.value()).abs() < 1e-15);
            }
            assert!(ext.zeta1[i].deriv(1) <= 0.0 && ext.zeta2[i].deriv(1) <= 0.0);
        }
    }

    #[test]
    fn admissibility_constants() {
        let (gas, force) = example();
        let bg = solve_background(&gas, &force, &linspace(-1.0, 0.5, 601)).unwrap();
        let xs = linspace(-1.0, 1.0, 801);
        let adm = verify_admissibility(&bg, &xs).unwrap();
        assert!(adm.kappa_star > 0.0);
        assert!(adm.margin_sign >= 0.0 && adm.margin_sign_ext >= 0.0);
        assert!(adm.margin_multiplier >= 0.0 && adm.margin_multiplier_ext >= 0.0);
        assert!(6.0 * (1.0 - adm.d0) < 0.0);
        // doubling d0 keeps the multiplier inequalities
        let ext = extend_background(&bg, &xs, adm.k0, 2.0 * adm.d0).unwrap();
        for ((p, q), &x) in ext.a11.iter().zip(&ext.a1).zip(&xs) {
            let (_, m, _, _) = node_terms(p, q, x, 2.0 * adm.d0, 0, 3);
            assert!(m >= 4.0);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn admissible_backgrounds_conserve_and_turn_sonic_at_the_origin(gamma in 1.2f64..3.0, u0 in 0.2f64..0.6) {
            let gas = GasConstants::new(gamma, 1.0, u0).unwrap();
            let Ok(force) = make_admissible_force(&gas, -1.0, 0.5, &ForceShape::default()) else {
                return Err(proptest::test_runner::TestCaseError::reject("template cannot reach the sonic state"));
            };
            let bg = solve_background(&gas, &force, &linspace(-1.0, 0.5, 301)).unwrap();
            proptest::prop_assert!(bg.mass_flux_defect() <= 1e-10);
            proptest::prop_assert!(bg.bernoulli_defect() <= 1e-10);
            proptest::prop_assert!(bg.sonic_crossings() <= 1);
            let (rho_s, u_s) = gas.sonic_state();
            let p = &bg.pts[200];
            proptest::prop_assert!(p.x.abs() < 1e-15);
            proptest::prop_assert!((p.u.value() - u_s).abs() <= 1e-8 && (p.rho.value() - rho_s).abs() <= 1e-8);
        }
    }
}
