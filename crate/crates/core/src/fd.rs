//! Finite-difference weights on uniform axial grids.

/// Fornberg's algorithm: weights for derivatives `0..=m` at `z` using nodes `x`.
/// Returns `w[k][j]`, the weight of node `j` for the k-th derivative.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative stencils for every node of a uniform grid with `n` nodes.
///
/// Each node uses a window of `width` consecutive nodes, centred when possible
/// and shifted inward near the ends.
#[derive(Debug, Clone)]
pub struct Stencils {
    pub width: usize,
    /// First node of the window at each grid node.
    pub start: Vec<usize>,
    /// `w[k][i][j]`: weight for derivative k at node i on window node j (unit spacing).
    pub w: Vec<Vec<Vec<f64>>>,
    pub h: f64,
}

impl Stencils {
    pub fn new(n: usize, h: f64, width: usize, max_deriv: usize) -> Self {
        assert!(n >= width, "grid has fewer nodes than the stencil width");
        let half = width / 2;
        let mut start = Vec::with_capacity(n);
        let mut w = vec![Vec::with_capacity(n); max_deriv + 1];
        for i in 0..n {
            let s = i.saturating_sub(half).min(n - width);
            start.push(s);
            let xs: Vec<f64> = (0..width).map(|j| (s + j) as f64).collect();
            let wk = fornberg(i as f64, &xs, max_deriv);
            for (k, row) in wk.into_iter().enumerate() {
                let scale = h.powi(k as i32);
                w[k].push(row.into_iter().map(|v| v / scale).collect());
            }
        }
        Stencils { width, start, w, h }
    }

    /// Apply derivative `k` to nodal values.
    pub fn apply(&self, k: usize, f: &[f64]) -> Vec<f64> {
        (0..f.len())
            .map(|i| {
                let s = self.start[i];
                self.w[k][i].iter().enumerate().map(|(j, w)| w * f[s + j]).sum()
            })
            .collect()
    }

    /// Derivative `k` at a single node.
    pub fn at(&self, k: usize, f: &[f64], i: usize) -> f64 {
        let s = self.start[i];
        self.w[k][i].iter().enumerate().map(|(j, w)| w * f[s + j]).sum()
    }
}

/// Lagrange interpolation of nodal values at an arbitrary point, using
/// `width` nodes around it.
pub fn interp_uniform(x0: f64, h: f64, f: &[f64], x: f64, width: usize) -> f64 {
    let n = f.len();
    let t = (x - x0) / h;
    let half = width / 2;
    let base = (t.floor() as isize - half as isize + 1).clamp(0, (n - width) as isize) as usize;
    let mut acc = 0.0;
    for j in 0..width {
        let xj = (base + j) as f64;
        if (t - xj).abs() < 1e-12 {
            return f[base + j];
        }
        let mut l = 1.0;
        for k in 0..width {
            if k != j {
                l *= (t - (base + k) as f64) / (xj - (base + k) as f64);
            }
        }
        acc += l * f[base + j];
    }
    acc
}

/// Fourth-order end-corrected trapezoid weights for `n >= 8` uniform nodes.
pub fn quadrature_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 8, "need at least 8 nodes for the corrected rule");
    let ends = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];
    let mut w = vec![h; n];
    for (k, e) in ends.iter().enumerate() {
        w[k] = e * h;
        w[n - 1 - k] = e * h;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_second_derivative_weights() {
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((w[2][0] - 1.0).abs() < 1e-14);
        assert!((w[2][1] + 2.0).abs() < 1e-14);
        assert!((w[1][2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn stencils_differentiate_polynomials_exactly() {
        let n = 20;
        let h = 0.1;
        let st = Stencils::new(n, h, 7, 3);
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(5)).collect();
        let d3 = st.apply(3, &f);
        for (i, v) in d3.iter().enumerate() {
            let x = i as f64 * h;
            assert!((v - 60.0 * x * x).abs() < 1e-7, "node {i}: {v}");
        }
    }

    #[test]
    fn corrected_trapezoid_is_fourth_order() {
        let err = |n: usize| {
            let h = 2.0 / (n - 1) as f64;
            let w = quadrature_weights(n, h);
            let s: f64 = w.iter().enumerate().map(|(i, w)| w * (i as f64 * h).exp()).sum();
            (s - (2f64.exp() - 1.0)).abs()
        };
        let (a, b) = (err(41), err(81));
        assert!(a / b > 14.0, "{a} {b}");
        assert!(b < 1e-6, "{b}");
    }

    #[test]
    fn interpolation_reproduces_quintics() {
        let f: Vec<f64> = (0..30).map(|i| (0.1 * i as f64).powi(5) - 1.0).collect();
        let x = 1.234;
        let v = interp_uniform(0.0, 0.1, &f, x, 6);
        assert!((v - (x.powi(5) - 1.0)).abs() < 1e-11);
    }
}
