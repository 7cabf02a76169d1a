//! Fourth-order reflection across the duct exit `x1 = L1`.
//!
//! `E(f)(x1) = sum_j c_j f(L1 + (L1 - x1)/j)` for `x1 > L1`, with the
//! weights chosen so that polynomials of degree three continue exactly.

use crate::error::{Error, Result};
use crate::fd::fornberg;
use crate::grid::AxialGrid;

/// Reflection weights `c_1..c_4`.
pub const EXT_COEFFS: [f64; 4] = [-10.0, 160.0, -405.0, 256.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rat {
    n: i128,
    d: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Rat {
    fn new(n: i128, d: i128) -> Self {
        let g = gcd(n, d).max(1);
        let s = if d < 0 { -1 } else { 1 };
        Rat { n: s * n / g, d: s * d / g }
    }
    fn sub(self, o: Rat) -> Rat {
        Rat::new(self.n * o.d - o.n * self.d, self.d * o.d)
    }
    fn mul(self, o: Rat) -> Rat {
        Rat::new(self.n * o.n, self.d * o.d)
    }
    fn div(self, o: Rat) -> Rat {
        Rat::new(self.n * o.d, self.d * o.n)
    }
}

/// Solve `sum_j (-1)^k j^-k c_j = 1`, `k = 0..3`, in exact rational arithmetic.
///
/// Returns numerator/denominator pairs; all denominators are 1.
pub fn extension_coefficients() -> [(i128, i128); 4] {
    let mut m = [[Rat::new(0, 1); 5]; 4];
    for (k, row) in m.iter_mut().enumerate() {
        for j in 1..=4i128 {
            let d = j.pow(k as u32);
            let sign = if k % 2 == 0 { 1 } else { -1 };
            row[j as usize - 1] = Rat::new(sign, d);
        }
        row[4] = Rat::new(1, 1);
    }
    for c in 0..4 {
        let p = (c..4).find(|&r| m[r][c].n != 0).expect("nonsingular moment system");
        m.swap(c, p);
        for r in 0..4 {
            if r != c && m[r][c].n != 0 {
                let f = m[r][c].div(m[c][c]);
                for k in c..5 {
                    m[r][k] = m[r][k].sub(f.mul(m[c][k]));
                }
            }
        }
    }
    let mut out = [(0, 1); 4];
    for c in 0..4 {
        let v = m[c][4].div(m[c][c]);
        out[c] = (v.n, v.d);
    }
    out
}

/// Reflected sample points for `x1 > L1`.
pub fn reflection_points(l1: f64, x: f64) -> [f64; 4] {
    [1.0, 2.0, 3.0, 4.0].map(|j| l1 + (l1 - x) / j)
}

/// Extension of a function known analytically on `(-inf, L1]`.
pub fn extend_fn(f: impl Fn(f64) -> f64, l1: f64, x: f64) -> f64 {
    if x <= l1 {
        return f(x);
    }
    reflection_points(l1, x).iter().zip(EXT_COEFFS).map(|(&y, c)| c * f(y)).sum()
}

/// Operator norm bound `max(1, sum |c_j|)` on sup norms.
pub fn bound_constant() -> f64 {
    EXT_COEFFS.iter().map(|c| c.abs()).sum::<f64>().max(1.0)
}

/// Precomputed extension of nodal data from `[L0, L1]` to the whole grid.
///
/// Reflected points generally fall between nodes, so nodal values are
/// interpolated with a 6-point Lagrange rule on the physical duct.
#[derive(Debug, Clone)]
pub struct Extender {
    /// Number of nodes in the physical duct.
    pub n_omega: usize,
    /// For each node past `L1`: `(first node, weights)` of its combination.
    rows: Vec<(usize, Vec<f64>)>,
}

const INTERP_WIDTH: usize = 6;

impl Extender {
    pub fn new(grid: &AxialGrid) -> Result<Self> {
        let n_omega = grid.omega_nodes();
        if n_omega < INTERP_WIDTH {
            return Err(Error::GridIncompatible("physical duct too short for the reflection stencil".into()));
        }
        let mut rows = Vec::new();
        for i in grid.i1 + 1..grid.nodes() {
            let x = grid.l0 + i as f64 * grid.h;
            let mut lo = usize::MAX;
            let mut parts = Vec::new();
            for (y, c) in reflection_points(grid.l1, x).iter().zip(EXT_COEFFS) {
                let t = (y - grid.l0) / grid.h;
                if t < -1e-9 {
                    return Err(Error::GridIncompatible(format!("reflected point {y} leaves the duct")));
                }
                let base = ((t.floor() as isize) - (INTERP_WIDTH as isize / 2 - 1))
                    .clamp(0, (n_omega - INTERP_WIDTH) as isize) as usize;
                let xs: Vec<f64> = (0..INTERP_WIDTH).map(|k| (base + k) as f64).collect();
                let w = if (t - t.round()).abs() < 1e-9 {
                    let r = t.round() as usize;
                    (0..INTERP_WIDTH).map(|k| if base + k == r { 1.0 } else { 0.0 }).collect()
                } else {
                    fornberg(t, &xs, 0).swap_remove(0)
                };
                lo = lo.min(base);
                parts.push((base, w, c));
            }
            let hi = parts.iter().map(|p| p.0 + INTERP_WIDTH).max().unwrap();
            let mut w = vec![0.0; hi - lo];
            for (base, ws, c) in parts {
                for (k, v) in ws.into_iter().enumerate() {
                    w[base + k - lo] += c * v;
                }
            }
            rows.push((lo, w));
        }
        Ok(Extender { n_omega, rows })
    }

    pub fn total_nodes(&self) -> usize {
        self.n_omega + self.rows.len()
    }

    /// Extend nodal values on the physical duct to the whole grid.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n_omega {
            return Err(Error::Dimension(format!("expected {} duct nodes, got {}", self.n_omega, f.len())));
        }
        let mut out = Vec::with_capacity(self.total_nodes());
        out.extend_from_slice(f);
        for (lo, w) in &self.rows {
            out.push(w.iter().zip(&f[*lo..]).map(|(a, b)| a * b).sum());
        }
        Ok(out)
    }

    /// Extend a field stored as `[node][component]` rows.
    pub fn apply_rows(&self, f: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if f.len() != self.n_omega {
            return Err(Error::Dimension(format!("expected {} duct nodes, got {}", self.n_omega, f.len())));
        }
        let width = f.first().map_or(0, |r| r.len());
        let mut out = f.to_vec();
        for (lo, w) in &self.rows {
            let mut row = vec![0.0; width];
            for (k, wk) in w.iter().enumerate() {
                for (o, v) in row.iter_mut().zip(&f[lo + k]) {
                    *o += wk * v;
                }
            }
            out.push(row);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_are_exact_integers() {
        let c = extension_coefficients();
        assert_eq!(c, [(-10, 1), (160, 1), (-405, 1), (256, 1)]);
        assert_eq!(c.iter().map(|v| v.0).sum::<i128>(), 1);
    }

    #[test]
    fn cubics_continue_exactly() {
        let l1 = 0.5;
        for &x in &[0.55, 0.7, 0.93, 1.0] {
            let e = extend_fn(|y| (y - l1).powi(3) - 2.0 * (y - l1) + 3.0, l1, x);
            let want = (x - l1).powi(3) - 2.0 * (x - l1) + 3.0;
            assert!((e - want).abs() < 1e-11);
        }
    }

    #[test]
    fn grid_extension_reproduces_constants_and_cubics() {
        let g = AxialGrid::new(-1.0, 0.5, 840).unwrap();
        let ext = Extender::new(&g).unwrap();
        let ones = vec![3.0; g.omega_nodes()];
        assert!(ext.apply(&ones).unwrap().iter().all(|v| (v - 3.0).abs() < 1e-11));
        let cub: Vec<f64> = g.omega_x().iter().map(|x| (x - 0.5f64).powi(3)).collect();
        let e = ext.apply(&cub).unwrap();
        for (i, v) in e.iter().enumerate() {
            let x = g.l0 + i as f64 * g.h;
            assert!((v - (x - 0.5).powi(3)).abs() < 1e-11);
        }
    }

    #[test]
    fn grid_extension_matches_analytic_for_smooth_data() {
        let g = AxialGrid::new(-1.0, 0.5, 840).unwrap();
        let ext = Extender::new(&g).unwrap();
        let f: Vec<f64> = g.omega_x().iter().map(|x| x.sin()).collect();
        let e = ext.apply(&f).unwrap();
        for (i, v) in e.iter().enumerate().skip(g.i1) {
            let x = g.l0 + i as f64 * g.h;
            assert!((v - extend_fn(f64::sin, 0.5, x)).abs() < 1e-9);
        }
    }

    #[test]
    fn extension_is_c3_across_the_exit() {
        let f = |x: f64| x.exp() * (3.0 * x).cos();
        let l1 = 0.5;
        let h = 1e-3;
        let nodes: Vec<f64> = (-3..=3).map(|k| l1 + k as f64 * h).collect();
        let w = fornberg(l1, &nodes, 4);
        let deriv = |g: &dyn Fn(f64) -> f64, k: usize| nodes.iter().zip(&w[k]).map(|(x, w)| w * g(*x)).sum::<f64>();
        // the right-hand formula, evaluated on both sides of L1
        let e = |x: f64| reflection_points(l1, x).iter().zip(EXT_COEFFS).map(|(&y, c)| c * f(y)).sum::<f64>();
        for k in 0..4 {
            let (a, b) = (deriv(&f, k), deriv(&e, k));
            assert!((a - b).abs() <= 2e-5 * a.abs().max(1.0), "derivative {k}: {a} vs {b}");
        }
        // the fourth derivative is reflected with weight sum c_j / j^4 = -4
        let (a, b) = (deriv(&f, 4), deriv(&e, 4));
        assert!((b + 4.0 * a).abs() <= 1e-2 * a.abs(), "{a} {b}");
    }

    proptest::proptest! {
        #[test]
        fn cubics_are_reproduced_past_the_exit(c in proptest::array::uniform4(-2.0f64..2.0), l1 in 0.1f64..1.0, t in 0.0f64..1.0) {
            let p = |x: f64| c[0] + x * (c[1] + x * (c[2] + x * c[3]));
            let x = l1 + t * 0.5 * l1;
            let scale = 1.0 + c.iter().map(|v| v.abs()).sum::<f64>() * 8.0;
            proptest::prop_assert!((extend_fn(p, l1, x) - p(x)).abs() <= 1e-12 * scale * bound_constant());
        }
    }
}
