//! The sigma-regularised Galerkin system on the extended duct and its
//! continuation to `sigma = 0`.

use rayon::prelude::*;
use serde::Serialize;

use super::coeffs::MixedCoefficients;
use super::Discretization;
use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::fd::{fornberg, Stencils};
use crate::xsection::SpectralField;

/// Mode-coupling matrices at every node of the whole grid, row-major `M x M` blocks.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    pub modes: usize,
    pub nodes: usize,
    /// Coefficient of `A_j''` in equation `m`.
    pub a: Vec<f64>,
    /// Coefficient of `A_j'`.
    pub b: Vec<f64>,
    /// Coefficient of `A_j`.
    pub c: Vec<f64>,
    /// True when every block is diagonal, so the modes decouple.
    pub diagonal: bool,
}

impl GalerkinSystem {
    #[inline]
    fn at(&self, v: &[f64], i: usize, m: usize, j: usize) -> f64 {
        v[(i * self.modes + m) * self.modes + j]
    }

    /// Largest asymmetry `|a_mj - a_jm|` over all nodes.
    pub fn a_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nodes {
            for m in 0..self.modes {
                for j in 0..m {
                    worst = worst.max((self.at(&self.a, i, m, j) - self.at(&self.a, i, j, m)).abs());
                }
            }
        }
        worst
    }
}

/// Project the coefficients onto the modes and extend the blocks past `L1`.
pub fn assemble_system(disc: &Discretization, coeffs: &MixedCoefficients) -> Result<GalerkinSystem> {
    let mm = disc.modes();
    let n = disc.grid.nodes();
    let no = disc.omega_nodes();
    let eig = &disc.basis.eigenvalues;
    if coeffs.ext.a11.len() != n {
        return Err(Error::Dimension(format!("extended background has {} nodes, grid has {n}", coeffs.ext.a11.len())));
    }
    let mut a = vec![0.0; n * mm * mm];
    let mut b = vec![0.0; n * mm * mm];
    let mut c = vec![0.0; n * mm * mm];
    let diagonal = coeffs.fields.is_none();
    if let Some(fields) = &coeffs.fields {
        // Perturbation blocks on duct nodes, then extension node by node.
        let tab = &disc.basis.table;
        let w = &disc.cs.weights;
        let np = disc.cs.npts();
        let blocks: Vec<[Vec<f64>; 3]> = (0..no)
            .into_par_iter()
            .map(|i| {
                let dk = &fields.dk;
                let mut ba = vec![0.0; mm * mm];
                let mut bb = vec![0.0; mm * mm];
                let mut bc = vec![0.0; mm * mm];
                let mut t = vec![0.0; np];
                for m in 0..mm {
                    for p in 0..np {
                        t[p] = w[p] * tab[m][p][0];
                    }
                    for j in 0..mm {
                        let (mut sa, mut sb, mut sc) = (0.0, 0.0, 0.0);
                        for p in 0..np {
                            let bj = &tab[j][p];
                            sa += t[p] * dk[0][i][p] * bj[0];
                            sb += t[p] * (dk[1][i][p] * bj[1] + dk[2][i][p] * bj[2]);
                            sc += t[p] * (dk[3][i][p] * bj[3] + 2.0 * dk[4][i][p] * bj[4] + dk[5][i][p] * bj[5]);
                        }
                        ba[m * mm + j] = sa;
                        bb[m * mm + j] = 2.0 * sb;
                        bc[m * mm + j] = sc;
                    }
                }
                [ba, bb, bc]
            })
            .collect();
        for (dst, k) in [(&mut a, 0), (&mut b, 1), (&mut c, 2)] {
            for e in 0..mm * mm {
                let col: Vec<f64> = blocks.iter().map(|bl| bl[k][e]).collect();
                for (i, v) in disc.ext.apply(&col)?.into_iter().enumerate() {
                    dst[i * mm * mm + e] = v;
                }
            }
        }
    }
    for i in 0..n {
        let (a11, a1) = (coeffs.ext.a11[i].value(), coeffs.ext.a1[i].value());
        for m in 0..mm {
            let d = (i * mm + m) * mm + m;
            a[d] += a11;
            b[d] += a1;
            c[d] -= eig[m];
        }
    }
    Ok(GalerkinSystem { modes: mm, nodes: n, a, b, c, diagonal })
}

/// Default sigma ladder: `1e-2` halved ten times.
pub fn default_ladder() -> Vec<f64> {
    (0..11).map(|k| 1e-2 * 0.5f64.powi(k)).collect()
}

/// Width of the first- and second-derivative stencils of the axial ODEs.
const W12: usize = 5;
/// Width of the third-derivative stencil, which reaches `D3_BACK` nodes upstream.
const W3: usize = 6;
const D3_BACK: usize = 4;

/// Axial stencils of the regularised ODE system.
struct OdeStencils {
    d: Stencils,
    d3_start: Vec<usize>,
    d3: Vec<[f64; W3]>,
    /// Weight of the third-order term at each node.
    ramp: Vec<f64>,
}

/// Weight of the regularising term: 0 on `[L0, L0/2]`, 1 from `L0/4` on.
///
/// The entrance zone is subsonic, so the limit problem needs only
/// `A(L0) = 0` there. Without the third-order term no entrance layer forms.
pub fn regularisation_ramp(l0: f64, x: f64) -> f64 {
    crate::cutoff::smooth_step_f64((x - 0.5 * l0) / (-0.25 * l0))
}

impl OdeStencils {
    fn new(grid: &crate::grid::AxialGrid) -> Self {
        let (n, h) = (grid.nodes(), grid.h);
        let ramp = grid.x.iter().map(|&x| regularisation_ramp(grid.l0, x)).collect();
        let d = Stencils::new(n, h, W12, 2);
        let mut d3_start = Vec::with_capacity(n);
        let mut d3 = Vec::with_capacity(n);
        let h3 = h * h * h;
        for i in 0..n {
            let s = i.saturating_sub(D3_BACK).min(n - W3);
            let z: Vec<f64> = (0..W3).map(|j| (s + j) as f64 - i as f64).collect();
            let w = fornberg(0.0, &z, 3);
            let mut row = [0.0; W3];
            for (r, v) in row.iter_mut().zip(&w[3]) {
                *r = v / h3;
            }
            d3_start.push(s);
            d3.push(row);
        }
        OdeStencils { d, d3_start, d3, ramp }
    }
}

/// Smallest sigma the grid resolves: the regularised fast layer has width
/// `sigma / |a11|`, which must not fall below one axial cell.
pub fn sigma_floor(disc: &Discretization, coeffs: &MixedCoefficients) -> f64 {
    coeffs.ext.a11.iter().fold(0.0f64, |m, a| m.max(a.value().abs())) * disc.grid.h
}

/// Fill and solve one banded system for modes `ms` (all modes when coupled).
///
/// Rows: `A(L0) = 0` at the entrance, `A'(L2) = 0` at the exit, the
/// equations at the remaining nodes. The third derivative is biased
/// upstream so the discrete fast mode stays damped.
fn solve_block(st: &OdeStencils, sys: &GalerkinSystem, ms: &[usize], g: &SpectralField, sigma: f64) -> Result<Vec<Vec<f64>>> {
    let d = &st.d;
    let n = sys.nodes;
    let k = ms.len();
    // node offsets reach D3_BACK + 1 below (exit row) and 3 above (first row)
    let mut mat = BandMatrix::zeros(n * k, (D3_BACK + 1) * k, 4 * k);
    let mut rhs = vec![0.0; n * k];
    for (lm, &m) in ms.iter().enumerate() {
        mat.add(lm, lm, 1.0);
        let r = (n - 1) * k + lm;
        for s in 0..W12 {
            mat.add(r, (d.start[n - 1] + s) * k + lm, d.w[1][n - 1][s]);
        }
        for i in 1..n - 1 {
            let r = i * k + lm;
            rhs[r] = g.coeffs[m][i];
            for s in 0..W12 {
                let col = d.start[i] + s;
                let (w1, w2) = (d.w[1][i][s], d.w[2][i][s]);
                for (lj, &j) in ms.iter().enumerate() {
                    let mut v = sys.at(&sys.a, i, m, j) * w2 + sys.at(&sys.b, i, m, j) * w1;
                    if col == i {
                        v += sys.at(&sys.c, i, m, j);
                    }
                    if v != 0.0 {
                        mat.add(r, col * k + lj, v);
                    }
                }
            }
            if st.ramp[i] > 0.0 {
                for (s, w) in st.d3[i].iter().enumerate() {
                    mat.add(r, (st.d3_start[i] + s) * k + lm, sigma * st.ramp[i] * w);
                }
            }
        }
    }
    let lu = mat
        .factor()
        .map_err(|e| Error::Singular(format!("Galerkin system with sigma = {sigma:e}, {} modes: {e}", sys.modes)))?;
    lu.solve(&mut rhs);
    Ok((0..k).map(|lm| (0..n).map(|i| rhs[i * k + lm]).collect()).collect())
}

/// Solve the regularised system for one `sigma` on the whole grid.
pub fn galerkin_solve(disc: &Discretization, sys: &GalerkinSystem, g: &SpectralField, sigma: f64) -> Result<SpectralField> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    if g.modes() != sys.modes || g.nodes() != sys.nodes {
        return Err(Error::Dimension(format!(
            "load has {} modes x {} nodes, system has {} x {}",
            g.modes(),
            g.nodes(),
            sys.modes,
            sys.nodes
        )));
    }
    let st = OdeStencils::new(&disc.grid);
    if sys.diagonal {
        let cols: Vec<Result<Vec<Vec<f64>>>> = (0..sys.modes)
            .into_par_iter()
            .map(|m| {
                if g.coeffs[m].iter().all(|v| *v == 0.0) {
                    Ok(vec![vec![0.0; sys.nodes]])
                } else {
                    solve_block(&st, sys, &[m], g, sigma)
                }
            })
            .collect();
        let mut coeffs = Vec::with_capacity(sys.modes);
        for c in cols {
            coeffs.push(c?.swap_remove(0));
        }
        Ok(SpectralField { coeffs })
    } else {
        let ms: Vec<usize> = (0..sys.modes).collect();
        Ok(SpectralField { coeffs: solve_block(&st, sys, &ms, g, sigma)? })
    }
}

/// Exit-layer widths kept between the hyperbolic end of the extension and `L1`.
pub const LAYER_WIDTHS: f64 = 30.0;

/// Largest sigma whose regularisation layer stays clear of the duct.
///
/// In the supersonic part the fast mode decays upstream from the point past
/// `L1` where the blended `a11` turns positive, at rate `|a11| / sigma`.
/// Below this ceiling its tail at `L1` is under `exp(-LAYER_WIDTHS)`.
pub fn layer_ceiling(disc: &Discretization, coeffs: &MixedCoefficients) -> f64 {
    let g = &disc.grid;
    let a11 = &coeffs.ext.a11;
    let mut area = 0.0;
    for i in g.i1..a11.len() - 1 {
        let (p, q) = (a11[i].value(), a11[i + 1].value());
        if q >= 0.0 {
            return (area + 0.5 * g.h * p.abs()) / LAYER_WIDTHS;
        }
        area += 0.5 * g.h * (p.abs() + q.abs());
    }
    f64::INFINITY
}

/// Outcome of a sigma continuation.
#[derive(Debug, Clone, Serialize)]
pub struct LadderReport {
    /// Ladder values actually solved.
    pub sigmas: Vec<f64>,
    /// Ladder values below [`sigma_floor`], not solved.
    pub skipped: Vec<f64>,
    pub sigma_floor: f64,
    /// `|| Psi(sigma_k) - Psi(sigma_k+1) ||` on the whole grid.
    pub diffs: Vec<f64>,
    /// Number of ladder points in the polynomial extrapolation.
    pub extrapolation_points: usize,
    /// `|| Psi(0) - Psi(sigma_last) ||`.
    pub extrapolation_step: f64,
}

pub fn l2(disc: &Discretization, f: &SpectralField) -> f64 {
    let w = crate::fd::quadrature_weights(f.nodes(), disc.grid.h);
    f.coeffs.iter().map(|c| c.iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>()).sum::<f64>().sqrt()
}

/// Value at `sigma = 0` of the polynomial through `(s_k, v_k)` (Neville).
fn extrapolate_to_zero(s: &[f64], v: &[SpectralField]) -> SpectralField {
    let mut p = v.to_vec();
    for lvl in 1..s.len() {
        for j in 0..s.len() - lvl {
            let (s0, s1) = (s[j], s[j + lvl]);
            let mut q = p[j].clone();
            q.scale(s1 / (s1 - s0));
            q.axpy(-s0 / (s1 - s0), &p[j + 1]);
            p[j] = q;
        }
    }
    p.swap_remove(0)
}

/// Ladder points used in the extrapolation to `sigma = 0`.
pub const EXTRAPOLATION_POINTS: usize = 4;

/// Solve on the duct: extend the load, run the resolved part of the sigma
/// ladder, extrapolate polynomially to `sigma = 0` and restrict back.
pub fn solve_linear_mixed(disc: &Discretization, sys: &GalerkinSystem, coeffs: &MixedCoefficients, f: &SpectralField, ladder: &[f64]) -> Result<(SpectralField, LadderReport)> {
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("sigma ladder must be strictly decreasing".into()));
    }
    let floor = sigma_floor(disc, coeffs);
    let (used, skipped): (Vec<f64>, Vec<f64>) = ladder.iter().partition(|s| **s >= floor);
    if used.len() < 2 {
        return Err(Error::ContinuationFailure(format!(
            "only {} ladder values resolve on this grid (sigma >= {floor:e}); need two",
            used.len()
        )));
    }
    let g = disc.extend(f)?;
    let mut sols: Vec<SpectralField> = Vec::with_capacity(used.len());
    let mut diffs = Vec::new();
    for &s in &used {
        let psi = galerkin_solve(disc, sys, &g, s)?;
        if let Some(p) = sols.last() {
            let mut d = psi.clone();
            d.axpy(-1.0, p);
            diffs.push(l2(disc, &d));
        }
        sols.push(psi);
    }
    let scale = l2(disc, sols.last().unwrap());
    let tiny = 1e-13 * scale.max(f64::MIN_POSITIVE);
    for (k, w) in diffs.windows(2).enumerate() {
        if w[1] >= w[0] && w[1] > tiny {
            return Err(Error::ContinuationFailure(format!(
                "sigma ladder not Cauchy: difference {:e} at sigma = {:e} does not decrease from {:e}",
                w[1],
                used[k + 2],
                w[0]
            )));
        }
    }
    let k = used.len().min(EXTRAPOLATION_POINTS);
    let psi = extrapolate_to_zero(&used[used.len() - k..], &sols[sols.len() - k..]);
    let mut step = psi.clone();
    step.axpy(-1.0, sols.last().unwrap());
    let report = LadderReport { sigmas: used, skipped, sigma_floor: floor, diffs, extrapolation_points: k, extrapolation_step: l2(disc, &step) };
    Ok((disc.restrict(&psi), report))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bgflow::{self, ExtendedBackground, ForceShape, GasConstants};
    use crate::grid::AxialGrid;
    use crate::xsection::build_rectangle;
    pub(crate) use crate::mixed::manufactured::manufactured;

    pub(crate) fn example(n1: usize, modes: usize) -> (Discretization, ExtendedBackground) {
        let gas = GasConstants::new(2.0, 1.0, 0.5).unwrap();
        let force = bgflow::make_admissible_force(&gas, -1.0, 0.5, &ForceShape::default()).unwrap();
        let grid = AxialGrid::new(-1.0, 0.5, n1).unwrap();
        let bg = bgflow::solve_background(&gas, &force, grid.omega_x()).unwrap();
        let adm = bgflow::verify_admissibility(&bg, &grid.x).unwrap();
        let ext = bgflow::extend_background(&bg, &grid.x, adm.k0, adm.d0).unwrap();
        let cs = build_rectangle(std::f64::consts::PI, std::f64::consts::PI, 16, 16).unwrap();
        (Discretization::new(grid, cs, modes).unwrap(), ext)
    }

    fn rel_err(disc: &Discretization, got: &SpectralField, exact: &SpectralField) -> f64 {
        let mut e = got.clone();
        e.axpy(-1.0, exact);
        l2(disc, &e) / l2(disc, exact)
    }

    fn background_case(n1: usize, placed: &[(usize, f64)]) -> (f64, LadderReport) {
        let (disc, ext) = example(n1, 8);
        let coeffs = MixedCoefficients::background(&ext);
        let sys = assemble_system(&disc, &coeffs).unwrap();
        let (load, exact) = manufactured(&disc, &ext, placed);
        let (psi, rep) = solve_linear_mixed(&disc, &sys, &coeffs, &load, &default_ladder()).unwrap();
        (rel_err(&disc, &psi, &exact), rep)
    }

    #[test]
    fn manufactured_mode_converges() {
        let placed = [(0, 1.0), (3, -0.5), (7, 0.25)];
        let (e1, _) = background_case(840, &placed);
        let (e2, rep) = background_case(1680, &placed);
        assert!(e2 <= 1e-4, "relative error {e2:e}");
        assert!((e1 / e2).log2() >= 2.0, "errors {e1:e} {e2:e}");
        assert!(rep.diffs.windows(2).all(|w| w[1] < w[0]), "{:?}", rep.diffs);
        assert!(rep.skipped.iter().all(|s| *s < rep.sigma_floor));
    }

    #[test]
    fn zero_load_gives_zero() {
        let (disc, ext) = example(840, 6);
        let coeffs = MixedCoefficients::background(&ext);
        let sys = assemble_system(&disc, &coeffs).unwrap();
        let zero = SpectralField::zeros(6, disc.omega_nodes());
        let (psi, _) = solve_linear_mixed(&disc, &sys, &coeffs, &zero, &default_ladder()).unwrap();
        assert_eq!(psi.max_abs(), 0.0);
    }

    #[test]
    fn solution_is_linear_in_the_load() {
        let (disc, ext) = example(840, 6);
        let coeffs = MixedCoefficients::background(&ext);
        let sys = assemble_system(&disc, &coeffs).unwrap();
        let (f1, _) = manufactured(&disc, &ext, &[(1, 1.0)]);
        let (f2, _) = manufactured(&disc, &ext, &[(1, 0.3), (4, 2.0)]);
        let mut f12 = f1.clone();
        f12.axpy(1.0, &f2);
        let solve = |f: &SpectralField| solve_linear_mixed(&disc, &sys, &coeffs, f, &default_ladder()).unwrap().0;
        let mut d = solve(&f12);
        d.axpy(-1.0, &solve(&f1));
        d.axpy(-1.0, &solve(&f2));
        assert!(d.max_abs() <= 1e-9 * solve(&f12).max_abs(), "{}", d.max_abs());
    }

    #[test]
    fn two_ladders_agree() {
        let (disc, ext) = example(1680, 4);
        let coeffs = MixedCoefficients::background(&ext);
        let sys = assemble_system(&disc, &coeffs).unwrap();
        let (load, _) = manufactured(&disc, &ext, &[(2, 1.0)]);
        let (p1, r1) = solve_linear_mixed(&disc, &sys, &coeffs, &load, &default_ladder()).unwrap();
        let other: Vec<f64> = (0..8).map(|k| 8e-3 * 0.6f64.powi(k)).collect();
        let (p2, r2) = solve_linear_mixed(&disc, &sys, &coeffs, &load, &other).unwrap();
        let mut d = p1.clone();
        d.axpy(-1.0, &p2);
        let tol = 2.0 * r1.extrapolation_step.max(r2.extrapolation_step);
        assert!(l2(&disc, &d) <= tol, "{} vs {tol}", l2(&disc, &d));
    }

    #[test]
    fn extrapolation_is_exact_for_polynomials() {
        let s = [0.4, 0.2, 0.1, 0.05];
        let v: Vec<SpectralField> = s.iter().map(|&x: &f64| SpectralField { coeffs: vec![vec![3.0 - x + 2.0 * x * x - x.powi(3)]] }).collect();
        let p = extrapolate_to_zero(&s, &v);
        assert!((p.coeffs[0][0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unresolved_ladder() {
        let (disc, ext) = example(840, 2);
        let coeffs = MixedCoefficients::background(&ext);
        let sys = assemble_system(&disc, &coeffs).unwrap();
        let (load, _) = manufactured(&disc, &ext, &[(0, 1.0)]);
        let err = solve_linear_mixed(&disc, &sys, &coeffs, &load, &[1e-5, 5e-6]).unwrap_err();
        assert!(matches!(err, Error::ContinuationFailure(_)));
        assert!(matches!(galerkin_solve(&disc, &sys, &disc.extend(&load).unwrap(), 0.0), Err(Error::Config(_))));
    }
}
