//! Exact solutions of the background linear problem, for verification.

use super::Discretization;
use crate::bgflow::ExtendedBackground;
use crate::xsection::SpectralField;

/// `A(x) = (x - L0)^3 (x - L2)^2` and its first two derivatives. It
/// satisfies `A(L0) = A''(L0) = 0` and `A'(L2) = 0`.
pub fn profile(x: f64, l0: f64, l2: f64) -> [f64; 3] {
    let (p, q) = (x - l0, x - l2);
    [p.powi(3) * q * q, 3.0 * p * p * q * q + 2.0 * p.powi(3) * q, 6.0 * p * q * q + 12.0 * p * p * q + 2.0 * p.powi(3)]
}

/// Load and exact coefficients for [`profile`] placed on the given modes
/// with the given amplitudes, background coefficients only.
pub fn manufactured(disc: &Discretization, ext: &ExtendedBackground, placed: &[(usize, f64)]) -> (SpectralField, SpectralField) {
    let g = &disc.grid;
    let mut load = SpectralField::zeros(disc.modes(), g.omega_nodes());
    let mut exact = load.clone();
    for &(m, amp) in placed {
        let lam = disc.basis.eigenvalues[m];
        for i in 0..g.omega_nodes() {
            let [a, da, dda] = profile(g.x[i], g.l0, g.l2);
            load.coeffs[m][i] = amp * (ext.a11[i].value() * dda + ext.a1[i].value() * da - lam * a);
            exact.coeffs[m][i] = amp * a;
        }
    }
    (load, exact)
}
