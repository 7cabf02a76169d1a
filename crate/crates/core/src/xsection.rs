//! Rectangular duct cross-sections, their Laplacian eigenbases and the
//! spectral transforms between grid values and mode coefficients.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Cross-section shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rectangle { a: f64, b: f64 },
}

/// Cross-section with a tensor trapezoid grid that includes the edges.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub shape: Shape,
    pub a: f64,
    pub b: f64,
    pub n2: usize,
    pub n3: usize,
    pub x2: Vec<f64>,
    pub x3: Vec<f64>,
    /// Quadrature weight per node, index `p = i2 * n3 + i3`.
    pub weights: Vec<f64>,
    /// Boundary node indices and their outward normals.
    pub boundary: Vec<(usize, [f64; 2])>,
}

/// Build the rectangle `[0,a] x [0,b]` with `n2 x n3` nodes.
pub fn build_rectangle(a: f64, b: f64, n2: usize, n3: usize) -> Result<CrossSection> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidGeometry(format!("side lengths must be positive, got ({a}, {b})")));
    }
    if n2 < 4 || n3 < 4 {
        return Err(Error::InvalidGeometry(format!("need at least 4 nodes per side, got {n2} x {n3}")));
    }
    let h2 = a / (n2 - 1) as f64;
    let h3 = b / (n3 - 1) as f64;
    let x2: Vec<f64> = (0..n2).map(|i| i as f64 * h2).collect();
    let x3: Vec<f64> = (0..n3).map(|i| i as f64 * h3).collect();
    let tw = |i: usize, n: usize, h: f64| if i == 0 || i == n - 1 { 0.5 * h } else { h };
    let mut weights = Vec::with_capacity(n2 * n3);
    for i2 in 0..n2 {
        for i3 in 0..n3 {
            weights.push(tw(i2, n2, h2) * tw(i3, n3, h3));
        }
    }
    let mut boundary = Vec::new();
    for i2 in 0..n2 {
        for i3 in 0..n3 {
            let mut n = [0.0f64, 0.0];
            if i2 == 0 {
                n[0] -= 1.0;
            }
            if i2 == n2 - 1 {
                n[0] += 1.0;
            }
            if i3 == 0 {
                n[1] -= 1.0;
            }
            if i3 == n3 - 1 {
                n[1] += 1.0;
            }
            if n != [0.0, 0.0] {
                // corners get the bisector direction
                let l = (n[0] * n[0] + n[1] * n[1]).sqrt();
                boundary.push((i2 * n3 + i3, [n[0] / l, n[1] / l]));
            }
        }
    }
    Ok(CrossSection { shape: Shape::Rectangle { a, b }, a, b, n2, n3, x2, x3, weights, boundary })
}

impl CrossSection {
    pub fn npts(&self) -> usize {
        self.n2 * self.n3
    }

    pub fn area(&self) -> f64 {
        self.a * self.b
    }

    pub fn point(&self, p: usize) -> (f64, f64) {
        (self.x2[p / self.n3], self.x3[p % self.n3])
    }

    /// Edge normals at a boundary node. Corners carry both edge normals.
    pub fn edge_normals(&self, p: usize) -> Vec<[f64; 2]> {
        let (i2, i3) = (p / self.n3, p % self.n3);
        let mut out = Vec::new();
        if i2 == 0 {
            out.push([-1.0, 0.0]);
        }
        if i2 == self.n2 - 1 {
            out.push([1.0, 0.0]);
        }
        if i3 == 0 {
            out.push([0.0, -1.0]);
        }
        if i3 == self.n3 - 1 {
            out.push([0.0, 1.0]);
        }
        out
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Largest retained wavenumber index the grid integrates exactly in products.
    pub fn max_exact_mode(&self) -> (usize, usize) {
        ((self.n2 - 2) / 2, (self.n3 - 2) / 2)
    }
}

/// Boundary condition of a scalar eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// `cos(m pi x2/a) cos(n pi x3/b)`.
    Neumann,
    /// `sin sin`.
    Dirichlet,
    /// `sin(m pi x2/a) cos(n pi x3/b)`: the family of `d2` of a Neumann mode.
    SinCos,
    /// `cos sin`: the family of `d3` of a Neumann mode.
    CosSin,
}

impl BasisKind {
    /// Whether the `x2` and `x3` factors are sines.
    fn sines(self) -> (bool, bool) {
        match self {
            BasisKind::Neumann => (false, false),
            BasisKind::Dirichlet => (true, true),
            BasisKind::SinCos => (true, false),
            BasisKind::CosSin => (false, true),
        }
    }

    /// Whether the wavenumber pair gives a nonzero function in this family.
    pub fn admits(self, m: usize, n: usize) -> bool {
        let (s2, s3) = self.sines();
        !(s2 && m == 0) && !(s3 && n == 0)
    }
}

/// 1-D factor `cos(w x)` or `sin(w x)` and its first two derivatives.
fn factor(sine: bool, w: f64, x: f64) -> [f64; 3] {
    let (s, c) = (w * x).sin_cos();
    if sine {
        [s, w * c, -w * w * s]
    } else {
        [c, -w * s, -w * w * c]
    }
}

/// `sin(k t)` and `cos(k t)` for `k = 0..=top`, by the angle-addition recurrence.
#[derive(Debug, Clone)]
pub struct Trig {
    pub s: Vec<f64>,
    pub c: Vec<f64>,
}

impl Trig {
    pub fn new(t: f64, top: usize) -> Self {
        let (s1, c1) = t.sin_cos();
        let mut s = vec![0.0; top + 1];
        let mut c = vec![1.0; top + 1];
        for k in 1..=top {
            s[k] = s[k - 1] * c1 + c[k - 1] * s1;
            c[k] = c[k - 1] * c1 - s[k - 1] * s1;
        }
        Trig { s, c }
    }
}

/// Values of a mode and its derivatives: `[f, d2, d3, d22, d23, d33]`.
pub type ModeJet = [f64; 6];

/// Eigenfunctions of `-(d22 + d33)` on the rectangle with Neumann or Dirichlet walls.
#[derive(Debug, Clone)]
pub struct ScalarEigenBasis {
    pub kind: BasisKind,
    pub a: f64,
    pub b: f64,
    /// Wavenumber pairs `(m, n)`.
    pub modes: Vec<(usize, usize)>,
    pub eigenvalues: Vec<f64>,
    norms: Vec<f64>,
    /// Tabulated mode jets on the cross-section grid, `table[k][p]`.
    pub table: Vec<Vec<ModeJet>>,
}

fn sorted_pairs(a: f64, b: f64, count: usize, min_index: usize, step: usize) -> Vec<(usize, usize, f64)> {
    let top = step * (count + min_index + 1);
    let mut all = Vec::new();
    for m in (min_index..=top).step_by(step) {
        for n in (min_index..=top).step_by(step) {
            let lam = (m as f64 * PI / a).powi(2) + (n as f64 * PI / b).powi(2);
            all.push((m, n, lam));
        }
    }
    all.sort_by(|p, q| p.2.partial_cmp(&q.2).unwrap().then((p.0, p.1).cmp(&(q.0, q.1))));
    all.truncate(count);
    all
}

impl ScalarEigenBasis {
    fn build(cs: &CrossSection, kind: BasisKind, count: usize, step: usize) -> Result<Self> {
        if count < 1 {
            return Err(Error::InvalidGeometry("mode count must be at least 1".into()));
        }
        let min_index = if kind == BasisKind::Neumann { 0 } else { 1 };
        let pairs: Vec<(usize, usize)> = sorted_pairs(cs.a, cs.b, count, min_index, step).into_iter().map(|(m, n, _)| (m, n)).collect();
        Self::from_pairs(cs, kind, &pairs)
    }

    /// Basis of the given family on an explicit list of wavenumber pairs.
    /// Pairs the family does not admit (a sine with index 0) are dropped.
    pub fn from_pairs(cs: &CrossSection, kind: BasisKind, pairs: &[(usize, usize)]) -> Result<Self> {
        let (a, b) = (cs.a, cs.b);
        let mut modes = Vec::new();
        let mut eigenvalues = Vec::new();
        let mut norms = Vec::new();
        for &(m, n) in pairs.iter().filter(|&&(m, n)| kind.admits(m, n)) {
            let lam = (m as f64 * PI / a).powi(2) + (n as f64 * PI / b).powi(2);
            let f2 = if m == 0 { a } else { 0.5 * a };
            let f3 = if n == 0 { b } else { 0.5 * b };
            modes.push((m, n));
            eigenvalues.push(lam);
            norms.push(1.0 / (f2 * f3).sqrt());
        }
        if modes.is_empty() {
            return Err(Error::InvalidGeometry(format!("no {kind:?} mode among the requested pairs")));
        }
        let mut basis = ScalarEigenBasis { kind, a, b, modes, eigenvalues, norms, table: vec![] };
        basis.table = (0..basis.len())
            .map(|k| (0..cs.npts()).map(|p| {
                let (x2, x3) = cs.point(p);
                basis.eval(k, x2, x3)
            }).collect())
            .collect();
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Mode `k` and its first and second derivatives at `(x2, x3)`.
    pub fn eval(&self, k: usize, x2: f64, x3: f64) -> ModeJet {
        let (m, n) = self.modes[k];
        let (s2, s3) = self.kind.sines();
        let f = factor(s2, m as f64 * PI / self.a, x2);
        let g = factor(s3, n as f64 * PI / self.b, x3);
        let c = self.norms[k];
        [c * f[0] * g[0], c * f[1] * g[0], c * f[0] * g[1], c * f[2] * g[0], c * f[1] * g[1], c * f[0] * g[2]]
    }

    /// Largest boundary-condition residual over the boundary nodes.
    pub fn boundary_residual(&self, cs: &CrossSection) -> f64 {
        let mut worst = 0.0f64;
        for &(p, _) in &cs.boundary {
            for k in 0..self.len() {
                let j = &self.table[k][p];
                // a sine factor vanishes on its two walls, a cosine has zero slope there
                let (s2, s3) = self.kind.sines();
                let r = cs
                    .edge_normals(p)
                    .iter()
                    .map(|n| {
                        let sine = if n[0] != 0.0 { s2 } else { s3 };
                        if sine {
                            j[0].abs()
                        } else {
                            (n[0] * j[1] + n[1] * j[2]).abs()
                        }
                    })
                    .fold(0.0, f64::max);
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Max deviation of the quadrature Gram matrix from the identity.
    pub fn orthonormality_residual(&self, cs: &CrossSection) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..=i {
                let g: f64 = (0..cs.npts()).map(|p| cs.weights[p] * self.table[i][p][0] * self.table[j][p][0]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Quadrature projection of one cross-section slice onto the modes.
    pub fn analyze_slice(&self, cs: &CrossSection, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != cs.npts() || self.table.first().is_some_and(|t| t.len() != f.len()) {
            return Err(Error::Dimension(format!("slice has {} values, grid has {}", f.len(), cs.npts())));
        }
        Ok((0..self.len())
            .map(|k| f.iter().zip(&cs.weights).zip(&self.table[k]).map(|((v, w), b)| v * w * b[0]).sum())
            .collect())
    }

    /// Derivative component `d` (0 = value, 1 = d2, ... 5 = d33) of a coefficient vector on the grid.
    pub fn synthesize_slice(&self, coeffs: &[f64], d: usize) -> Vec<f64> {
        let np = self.table.first().map_or(0, |t| t.len());
        let mut out = vec![0.0; np];
        for (k, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                for (o, j) in out.iter_mut().zip(&self.table[k]) {
                    *o += c * j[d];
                }
            }
        }
        out
    }

    /// Largest wavenumber indices `(m, n)` among the modes.
    pub fn top(&self) -> (usize, usize) {
        (self.modes.iter().map(|m| m.0).max().unwrap_or(0), self.modes.iter().map(|m| m.1).max().unwrap_or(0))
    }

    /// Value of a coefficient vector at an arbitrary point.
    pub fn eval_value(&self, coeffs: &[f64], x2: f64, x3: f64) -> f64 {
        let (t2, t3) = self.top();
        self.eval_value_with(coeffs, &Trig::new(PI * x2 / self.a, t2), &Trig::new(PI * x3 / self.b, t3))
    }

    /// As [`Self::eval_value`] with precomputed tables for `pi x2 / a` and `pi x3 / b`.
    pub fn eval_value_with(&self, coeffs: &[f64], t2: &Trig, t3: &Trig) -> f64 {
        let (s2, s3) = self.kind.sines();
        let f2 = if s2 { &t2.s } else { &t2.c };
        let f3 = if s3 { &t3.s } else { &t3.c };
        self.modes.iter().zip(&self.norms).zip(coeffs).map(|((&(m, n), c), v)| v * c * f2[m] * f3[n]).sum()
    }

    /// Evaluate a coefficient vector and its derivatives at an arbitrary point.
    pub fn eval_sum(&self, coeffs: &[f64], x2: f64, x3: f64) -> ModeJet {
        let mut out = [0.0; 6];
        for (k, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                let j = self.eval(k, x2, x3);
                for d in 0..6 {
                    out[d] += c * j[d];
                }
            }
        }
        out
    }
}

pub fn neumann_basis(cs: &CrossSection, count: usize) -> Result<ScalarEigenBasis> {
    ScalarEigenBasis::build(cs, BasisKind::Neumann, count, 1)
}

/// Neumann modes with even wavenumbers only: the functions symmetric about
/// both mid-lines of the rectangle. Exact for mirror-symmetric data.
pub fn neumann_basis_symmetric(cs: &CrossSection, count: usize) -> Result<ScalarEigenBasis> {
    ScalarEigenBasis::build(cs, BasisKind::Neumann, count, 2)
}

pub fn dirichlet_basis(cs: &CrossSection, count: usize) -> Result<ScalarEigenBasis> {
    ScalarEigenBasis::build(cs, BasisKind::Dirichlet, count, 1)
}

/// Component jets of a vector mode: `[e2 jet, e3 jet]`.
pub type VectorModeJet = [ModeJet; 2];

/// Vector eigenfields with `n2 e3 - n3 e2 = 0` and `d2 e2 + d3 e3 = 0` on the wall.
#[derive(Debug, Clone)]
pub struct VectorEigenBasis {
    pub a: f64,
    pub b: f64,
    /// `(m, n, family)`; family 0 is the gradient family, 1 the solenoidal one.
    pub modes: Vec<(usize, usize, usize)>,
    pub eigenvalues: Vec<f64>,
    amps: Vec<[f64; 2]>,
    pub table: Vec<Vec<VectorModeJet>>,
}

pub fn vector_basis(cs: &CrossSection, count: usize) -> Result<VectorEigenBasis> {
    match cs.shape {
        Shape::Rectangle { .. } => {}
    }
    if count < 1 {
        return Err(Error::InvalidGeometry("mode count must be at least 1".into()));
    }
    let (a, b) = (cs.a, cs.b);
    let top = count + 2;
    let mut all = Vec::new();
    for m in 0..=top {
        for n in 0..=top {
            if m == 0 && n == 0 {
                continue;
            }
            let lam = (m as f64 * PI / a).powi(2) + (n as f64 * PI / b).powi(2);
            let fams = if m == 0 || n == 0 { 1 } else { 2 };
            for f in 0..fams {
                all.push((m, n, f, lam));
            }
        }
    }
    all.sort_by(|p, q| p.3.partial_cmp(&q.3).unwrap().then((p.0, p.1, p.2).cmp(&(q.0, q.1, q.2))));
    all.truncate(count);
    Ok(vector_basis_from(cs, all))
}

/// Vector basis on the wavenumber pairs of a scalar family: both families
/// for each pair with `m, n >= 1`, the single edge mode otherwise. The pair
/// `(0, 0)` is skipped.
pub fn vector_basis_from_pairs(cs: &CrossSection, pairs: &[(usize, usize)]) -> Result<VectorEigenBasis> {
    let mut all = Vec::new();
    for &(m, n) in pairs {
        if m == 0 && n == 0 {
            continue;
        }
        let lam = (m as f64 * PI / cs.a).powi(2) + (n as f64 * PI / cs.b).powi(2);
        let fams = if m == 0 || n == 0 { 1 } else { 2 };
        for f in 0..fams {
            all.push((m, n, f, lam));
        }
    }
    if all.is_empty() {
        return Err(Error::InvalidGeometry("no vector mode among the requested pairs".into()));
    }
    Ok(vector_basis_from(cs, all))
}

fn vector_basis_from(cs: &CrossSection, all: Vec<(usize, usize, usize, f64)>) -> VectorEigenBasis {
    let (a, b) = (cs.a, cs.b);
    let mut modes = Vec::new();
    let mut eigenvalues = Vec::new();
    let mut amps = Vec::new();
    for (m, n, f, lam) in all {
        let al = m as f64 * PI / a;
        let be = n as f64 * PI / b;
        let amp = if m == 0 {
            [(2.0 / (a * b)).sqrt(), 0.0]
        } else if n == 0 {
            [0.0, (2.0 / (a * b)).sqrt()]
        } else {
            let (p, q) = if f == 0 { (al, be) } else { (-be, al) };
            let s = 2.0 / ((p * p + q * q) * a * b).sqrt();
            [p * s, q * s]
        };
        modes.push((m, n, f));
        eigenvalues.push(lam);
        amps.push(amp);
    }
    let mut basis = VectorEigenBasis { a, b, modes, eigenvalues, amps, table: vec![] };
    basis.table = (0..basis.len())
        .map(|k| (0..cs.npts()).map(|p| {
            let (x2, x3) = cs.point(p);
            basis.eval(k, x2, x3)
        }).collect())
        .collect();
    basis
}

impl VectorEigenBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eval(&self, k: usize, x2: f64, x3: f64) -> VectorModeJet {
        let (m, n, _) = self.modes[k];
        let al = m as f64 * PI / self.a;
        let be = n as f64 * PI / self.b;
        let [p, q] = self.amps[k];
        let (s2, c2) = (al * x2).sin_cos();
        let (s3, c3) = (be * x3).sin_cos();
        // e2 = p cos(al x2) sin(be x3), e3 = q sin(al x2) cos(be x3)
        let e2 = [
            p * c2 * s3,
            -p * al * s2 * s3,
            p * be * c2 * c3,
            -p * al * al * c2 * s3,
            -p * al * be * s2 * c3,
            -p * be * be * c2 * s3,
        ];
        let e3 = [
            q * s2 * c3,
            q * al * c2 * c3,
            -q * be * s2 * s3,
            -q * al * al * s2 * c3,
            -q * al * be * c2 * s3,
            -q * be * be * s2 * c3,
        ];
        [e2, e3]
    }

    /// Largest of `|n2 e3 - n3 e2|` and `|d2 e2 + d3 e3|` over boundary nodes.
    pub fn boundary_residual(&self, cs: &CrossSection) -> f64 {
        let mut worst = 0.0f64;
        for &(p, _) in &cs.boundary {
            for k in 0..self.len() {
                let [e2, e3] = self.table[k][p];
                worst = worst.max((e2[1] + e3[2]).abs());
                for n in cs.edge_normals(p) {
                    worst = worst.max((n[0] * e3[0] - n[1] * e2[0]).abs());
                }
            }
        }
        worst
    }

    pub fn orthonormality_residual(&self, cs: &CrossSection) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..=i {
                let g: f64 = (0..cs.npts())
                    .map(|p| cs.weights[p] * (self.table[i][p][0][0] * self.table[j][p][0][0] + self.table[i][p][1][0] * self.table[j][p][1][0]))
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    pub fn analyze_slice(&self, cs: &CrossSection, f2: &[f64], f3: &[f64]) -> Result<Vec<f64>> {
        if f2.len() != cs.npts() || f3.len() != cs.npts() {
            return Err(Error::Dimension("vector slice does not match the grid".into()));
        }
        Ok((0..self.len())
            .map(|k| {
                (0..cs.npts())
                    .map(|p| cs.weights[p] * (f2[p] * self.table[k][p][0][0] + f3[p] * self.table[k][p][1][0]))
                    .sum()
            })
            .collect())
    }

    /// Component `c` (0 -> e2, 1 -> e3), derivative slot `d`, on the grid.
    pub fn synthesize_slice(&self, coeffs: &[f64], c: usize, d: usize) -> Vec<f64> {
        let np = self.table.first().map_or(0, |t| t.len());
        let mut out = vec![0.0; np];
        for (k, &v) in coeffs.iter().enumerate() {
            if v != 0.0 {
                for (o, j) in out.iter_mut().zip(&self.table[k]) {
                    *o += v * j[c][d];
                }
            }
        }
        out
    }
}

/// Mode coefficients `A_m(x1)` on an axial grid, stored `coeffs[m][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub coeffs: Vec<Vec<f64>>,
}

impl SpectralField {
    pub fn zeros(modes: usize, nodes: usize) -> Self {
        SpectralField { coeffs: vec![vec![0.0; nodes]; modes] }
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn nodes(&self) -> usize {
        self.coeffs.first().map_or(0, |c| c.len())
    }

    /// Coefficients at axial node `i`.
    pub fn slice(&self, i: usize) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[i]).collect()
    }

    pub fn axpy(&mut self, s: f64, other: &SpectralField) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for x in self.coeffs.iter_mut().flatten() {
            *x *= s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Project grid values `field[i][p]` (axial node, cross node) onto a scalar basis.
pub fn analyze(cs: &CrossSection, basis: &ScalarEigenBasis, field: &[Vec<f64>]) -> Result<SpectralField> {
    let nodes = field.len();
    let mut out = SpectralField::zeros(basis.len(), nodes);
    for (i, slice) in field.iter().enumerate() {
        let c = basis.analyze_slice(cs, slice)?;
        for (k, v) in c.into_iter().enumerate() {
            out.coeffs[k][i] = v;
        }
    }
    Ok(out)
}

/// Grid values of a spectral field, `out[i][p]`.
pub fn synthesize(basis: &ScalarEigenBasis, field: &SpectralField, d: usize) -> Vec<Vec<f64>> {
    (0..field.nodes()).map(|i| basis.synthesize_slice(&field.slice(i), d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn area_quadrature_is_exact() {
        let cs = build_rectangle(PI, PI, 32, 32).unwrap();
        assert!((cs.weights.iter().sum::<f64>() - PI * PI).abs() < 1e-12);
        assert!(cs.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn rectangle_normals() {
        let cs = build_rectangle(1.0, 2.0, 16, 16).unwrap();
        let p = 5; // i2 = 0, i3 = 5
        let n = cs.boundary.iter().find(|b| b.0 == p).unwrap().1;
        assert_eq!(n, [-1.0, 0.0]);
        for (_, n) in &cs.boundary {
            assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_geometry_rejected() {
        assert!(matches!(build_rectangle(-1.0, 1.0, 8, 8), Err(Error::InvalidGeometry(_))));
        assert!(matches!(build_rectangle(1.0, 1.0, 3, 8), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn neumann_spectrum_unit_pi_square() {
        let cs = build_rectangle(PI, PI, 16, 16).unwrap();
        let b = neumann_basis(&cs, 4).unwrap();
        let want = [0.0, 1.0, 1.0, 2.0];
        for (l, w) in b.eigenvalues.iter().zip(want) {
            assert!((l - w).abs() < 1e-12);
        }
        assert!((b.table[0][0][0] - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn neumann_second_eigenvalue_on_1x2() {
        let cs = build_rectangle(1.0, 2.0, 16, 16).unwrap();
        let b = neumann_basis(&cs, 3).unwrap();
        assert!((b.eigenvalues[1] - (PI / 2.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_spectrum() {
        let cs = build_rectangle(PI, PI, 16, 16).unwrap();
        let b = dirichlet_basis(&cs, 1).unwrap();
        assert!((b.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!(b.boundary_residual(&cs) < 1e-12);
        let cs = build_rectangle(1.0, 1.0, 16, 16).unwrap();
        let b = dirichlet_basis(&cs, 5).unwrap();
        let p2 = PI * PI;
        for (l, w) in b.eigenvalues.iter().zip([2.0, 5.0, 5.0, 8.0, 10.0]) {
            assert!((l - w * p2).abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormality_improves_with_resolution() {
        // the coarse grid cannot integrate the higher products exactly
        let coarse = build_rectangle(PI, PI, 8, 8).unwrap();
        let fine = build_rectangle(PI, PI, 64, 64).unwrap();
        let rc = neumann_basis(&coarse, 60).unwrap().orthonormality_residual(&coarse);
        let rf = neumann_basis(&fine, 30).unwrap().orthonormality_residual(&fine);
        assert!(rf < rc);
        assert!(rf < 1e-10);
    }

    #[test]
    fn vector_basis_boundary_and_gram() {
        let cs = build_rectangle(PI, PI, 24, 24).unwrap();
        let vb = vector_basis(&cs, 20).unwrap();
        assert!(vb.boundary_residual(&cs) < 1e-12);
        assert!(vb.orthonormality_residual(&cs) < 1e-10);
        let k = vb.modes.iter().position(|m| *m == (1, 1, 0)).unwrap();
        assert!((vb.eigenvalues[k] - 2.0).abs() < 1e-12);
        // m = 0, n = 1 edge mode is (sin x3, 0) times a norm, beta = 1
        let k = vb.modes.iter().position(|m| *m == (0, 1, 0)).unwrap();
        assert!((vb.eigenvalues[k] - 1.0).abs() < 1e-12);
        let j = vb.eval(k, 0.7, 1.1);
        assert!((j[0][0] - (2.0 / (PI * PI)).sqrt() * 1.1f64.sin()).abs() < 1e-14);
        assert_eq!(j[1][0], 0.0);
    }

    #[test]
    fn mixed_families_are_orthonormal_and_hold_derivatives_of_neumann_modes() {
        let cs = build_rectangle(PI, 2.0, 20, 20).unwrap();
        let nb = neumann_basis(&cs, 12).unwrap();
        for kind in [BasisKind::SinCos, BasisKind::CosSin, BasisKind::Dirichlet] {
            let b = ScalarEigenBasis::from_pairs(&cs, kind, &nb.modes).unwrap();
            assert!(b.orthonormality_residual(&cs) < 1e-12, "{kind:?}");
            assert!(b.boundary_residual(&cs) < 1e-12, "{kind:?}");
            assert!(b.modes.iter().all(|&(m, n)| kind.admits(m, n)));
        }
        // d2 of every Neumann mode is reproduced exactly by the sin-cos family
        let sc = ScalarEigenBasis::from_pairs(&cs, BasisKind::SinCos, &nb.modes).unwrap();
        let coeffs: Vec<f64> = (0..nb.len()).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let d2 = nb.synthesize_slice(&coeffs, 1);
        let back = sc.synthesize_slice(&sc.analyze_slice(&cs, &d2).unwrap(), 0);
        assert!(d2.iter().zip(&back).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn vector_basis_from_pairs_contains_the_dirichlet_gradients() {
        let cs = build_rectangle(PI, PI, 20, 20).unwrap();
        let nb = neumann_basis(&cs, 12).unwrap();
        let vb = vector_basis_from_pairs(&cs, &nb.modes).unwrap();
        assert!(vb.boundary_residual(&cs) < 1e-12);
        assert!(vb.orthonormality_residual(&cs) < 1e-10);
        let q = ScalarEigenBasis::from_pairs(&cs, BasisKind::Dirichlet, &nb.modes).unwrap();
        for k in 0..q.len() {
            let g2: Vec<f64> = q.table[k].iter().map(|j| j[1]).collect();
            let g3: Vec<f64> = q.table[k].iter().map(|j| j[2]).collect();
            let c = vb.analyze_slice(&cs, &g2, &g3).unwrap();
            // the gradient of q_k is sqrt(lambda_k) times one normalised vector mode
            let total: f64 = c.iter().map(|v| v * v).sum();
            assert!((total - q.eigenvalues[k]).abs() < 1e-10);
            assert_eq!(c.iter().filter(|v| v.abs() > 1e-10).count(), 1);
        }
    }

    #[test]
    fn analyze_single_mode_and_zero() {
        let cs = build_rectangle(PI, PI, 20, 20).unwrap();
        let b = neumann_basis(&cs, 8).unwrap();
        let f: Vec<f64> = (0..cs.npts()).map(|p| b.table[3][p][0]).collect();
        let c = b.analyze_slice(&cs, &f).unwrap();
        for (k, v) in c.iter().enumerate() {
            assert!((v - if k == 3 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
        let z = b.analyze_slice(&cs, &vec![0.0; cs.npts()]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        assert!(matches!(b.analyze_slice(&cs, &[0.0; 3]), Err(Error::Dimension(_))));
    }

    #[test]
    fn smooth_field_has_fast_coefficient_decay() {
        // exp(cos x2) cos-expands with super-algebraic decay
        let cs = build_rectangle(PI, PI, 64, 8).unwrap();
        let b = neumann_basis(&cs, 40).unwrap();
        let f: Vec<f64> = (0..cs.npts()).map(|p| cs.point(p).0.cos().exp()).collect();
        let c = b.analyze_slice(&cs, &f).unwrap();
        let amp = |m: usize| {
            b.modes.iter().zip(&c).filter(|(md, _)| md.0 == m && md.1 == 0).map(|(_, v)| v.abs()).sum::<f64>()
        };
        let (a4, a8) = (amp(4), amp(8));
        assert!(a8 < a4 * 1e-3, "tail {a4:e} -> {a8:e}");
    }

    proptest! {
        #[test]
        fn roundtrip_and_parseval(seed in proptest::collection::vec(-1.0f64..1.0, 12)) {
            let cs = build_rectangle(2.0, 3.0, 26, 26).unwrap();
            let b = neumann_basis(&cs, 12).unwrap();
            let g = b.synthesize_slice(&seed, 0);
            let back = b.analyze_slice(&cs, &g).unwrap();
            for (x, y) in back.iter().zip(&seed) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let l2: f64 = cs.integrate(&g.iter().map(|v| v * v).collect::<Vec<_>>());
            let l2c: f64 = seed.iter().map(|v| v * v).sum();
            prop_assert!((l2 - l2c).abs() < 1e-10);
        }

        #[test]
        fn eigenvalues_sorted(m in 1usize..40) {
            let cs = build_rectangle(1.0, 1.7, 12, 12).unwrap();
            for b in [neumann_basis(&cs, m).unwrap(), dirichlet_basis(&cs, m).unwrap()] {
                prop_assert!(b.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            }
            let v = vector_basis(&cs, m).unwrap();
            prop_assert!(v.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(v.eigenvalues[0] > 0.0);
        }
    }
}
