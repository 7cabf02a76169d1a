//! Self-adjoint two-point problems `(k a')' - lambda a = g` on a uniform grid.

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::fd::Stencils;

/// Boundary condition at one end: prescribed value or prescribed slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bc {
    Dirichlet(f64),
    Neumann(f64),
}

const WIDTH: usize = 7;

/// Solve with coefficient samples `k`, `dk = k'` and load `g` on nodes `x0 + i h`.
pub fn mode_bvp_solve(k: &[f64], dk: &[f64], lambda: f64, g: &[f64], h: f64, left: Bc, right: Bc) -> Result<Vec<f64>> {
    let n = g.len();
    if k.len() != n || dk.len() != n {
        return Err(Error::Dimension("coefficient and load lengths differ".into()));
    }
    if n < WIDTH {
        return Err(Error::GridIncompatible(format!("need at least {WIDTH} nodes, got {n}")));
    }
    let st = Stencils::new(n, h, WIDTH, 2);
    mode_bvp_solve_with(&st, k, dk, lambda, g, left, right)
}

/// As [`mode_bvp_solve`] with precomputed stencils.
pub fn mode_bvp_solve_with(st: &Stencils, k: &[f64], dk: &[f64], lambda: f64, g: &[f64], left: Bc, right: Bc) -> Result<Vec<f64>> {
    let n = g.len();
    let mut a = BandMatrix::zeros(n, WIDTH - 1, WIDTH - 1);
    let mut rhs = g.to_vec();
    for i in 1..n - 1 {
        let s = st.start[i];
        for j in 0..WIDTH {
            a.add(i, s + j, k[i] * st.w[2][i][j] + dk[i] * st.w[1][i][j]);
        }
        a.add(i, i, -lambda);
    }
    for (i, bc) in [(0, left), (n - 1, right)] {
        let s = st.start[i];
        match bc {
            Bc::Dirichlet(v) => {
                a.add(i, i, 1.0);
                rhs[i] = v;
            }
            Bc::Neumann(v) => {
                for j in 0..WIDTH {
                    a.add(i, s + j, st.w[1][i][j]);
                }
                rhs[i] = v;
            }
        }
    }
    let lu = a.factor().map_err(|e| Error::DegenerateCoefficient(format!("mode problem with lambda = {lambda}: {e}")))?;
    lu.solve(&mut rhs);
    Ok(rhs)
}

/// Closed-form decaying mode with `s(L0) = r`, `s'(L1) = 0` for `s'' = lambda s`.
pub fn decaying_mode(r: f64, lambda: f64, l0: f64, l1: f64, x: f64) -> f64 {
    if lambda == 0.0 {
        return r;
    }
    let q = lambda.sqrt();
    r / (1.0 + (2.0 * q * (l0 - l1)).exp()) * ((-q * (x - l0)).exp() + (q * (x + l0 - 2.0 * l1)).exp())
}

/// Derivative of [`decaying_mode`] in `x`.
pub fn decaying_mode_d(r: f64, lambda: f64, l0: f64, l1: f64, x: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let q = lambda.sqrt();
    r * q / (1.0 + (2.0 * q * (l0 - l1)).exp()) * (-(-q * (x - l0)).exp() + (q * (x + l0 - 2.0 * l1)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> (Vec<f64>, f64) {
        let h = (b - a) / (n - 1) as f64;
        ((0..n).map(|i| a + i as f64 * h).collect(), h)
    }

    #[test]
    fn zero_load_gives_zero() {
        let n = 50;
        let (_, h) = grid(0.0, 1.0, n);
        let a = mode_bvp_solve(&vec![1.0; n], &vec![0.0; n], 2.0, &vec![0.0; n], h, Bc::Dirichlet(0.0), Bc::Neumann(0.0)).unwrap();
        assert!(a.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn quadratic_is_exact() {
        let n = 401;
        let (x, h) = grid(-1.0, 0.0, n);
        let a = mode_bvp_solve(&vec![1.0; n], &vec![0.0; n], 0.0, &vec![1.0; n], h, Bc::Dirichlet(0.0), Bc::Dirichlet(0.0)).unwrap();
        let err = x.iter().zip(&a).map(|(x, a)| (a - 0.5 * (x * x + x)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn closed_form_decaying_mode() {
        let (l0, l1) = (-1.0, 0.5);
        let n = 601;
        let (x, h) = grid(l0, l1, n);
        let a = mode_bvp_solve(&vec![1.0; n], &vec![0.0; n], 1.0, &vec![0.0; n], h, Bc::Dirichlet(1.0), Bc::Neumann(0.0)).unwrap();
        let err = x.iter().zip(&a).map(|(&x, a)| (a - decaying_mode(1.0, 1.0, l0, l1, x)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn closed_form_boundary_values() {
        let s0 = decaying_mode(1.0, 1.0, -1.0, 1.0, -1.0);
        let d1 = decaying_mode_d(1.0, 1.0, -1.0, 1.0, 1.0);
        assert!((s0 - 1.0).abs() < 1e-15);
        assert!(d1.abs() < 1e-15);
    }

    #[test]
    fn variable_coefficient_fourth_order() {
        // (k a')' - a = g with k = 2 + x, exact a = cos(x)
        let run = |n: usize| {
            let (x, h) = grid(0.0, 1.0, n);
            let k: Vec<f64> = x.iter().map(|x| 2.0 + x).collect();
            let dk = vec![1.0; n];
            let g: Vec<f64> = x.iter().map(|x| -(x.sin()) - (2.0 + x) * x.cos() - x.cos()).collect();
            let a = mode_bvp_solve(&k, &dk, 1.0, &g, h, Bc::Neumann(0.0), Bc::Dirichlet(1f64.cos())).unwrap();
            x.iter().zip(&a).map(|(x, a)| (a - x.cos()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (run(11), run(21));
        assert!(e1 / e2 > 14.0, "{e1} {e2}");
    }
}
