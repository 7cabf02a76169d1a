//! Tangential entrance data `h = grad' g + (d3 chi, -d2 chi)` built from
//! wall-flat profiles, so the wall conditions hold by construction.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::xsection::CrossSection;

/// `sin(q x + phase)` terms with amplitudes.
#[derive(Debug, Clone)]
struct TrigSum {
    terms: Vec<(f64, f64, f64)>,
}

impl TrigSum {
    /// Derivatives `0..=3` at `x`.
    fn jet(&self, x: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for &(amp, q, ph) in &self.terms {
            for (k, o) in out.iter_mut().enumerate() {
                *o += amp * q.powi(k as i32) * (q * x + ph + k as f64 * FRAC_PI_2).sin();
            }
        }
        out
    }
}

/// `sin(m pi t) sin^p(pi t)` with `t = x / len`, written as a trigonometric sum.
///
/// For `p = 2` the profile and its first two derivatives vanish at both ends,
/// for `p = 3` also the third.
fn flat_profile(m: usize, p: u32, len: f64) -> TrigSum {
    let k = m as f64 * PI / len;
    let w = PI / len;
    let cos = FRAC_PI_2;
    let terms = match p {
        // sin(kx) (1 - cos 2wx)/2
        2 => vec![(0.5, k, 0.0), (-0.25, k + 2.0 * w, 0.0), (-0.25, k - 2.0 * w, 0.0)],
        // sin(kx) (3 sin wx - sin 3wx)/4
        3 => vec![
            (0.375, k - w, cos),
            (-0.375, k + w, cos),
            (-0.125, k - 3.0 * w, cos),
            (0.125, k + 3.0 * w, cos),
        ],
        _ => unreachable!("only profiles of power 2 and 3 are used"),
    };
    TrigSum { terms }
}

/// Coefficient `c` of the product profile in `x2` (index `m`) and `x3` (index `n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatMode {
    pub m: usize,
    pub n: usize,
    pub c: f64,
}

/// Entrance tangential velocity datum, before the `eps` scaling.
///
/// `chi` uses the power-2 profiles and carries the vorticity; `g` uses the
/// power-3 profiles and is curl-free.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TangentialDatum {
    pub chi: Vec<FlatMode>,
    pub g: Vec<FlatMode>,
}

/// `h2`, `h3` with their first and second derivatives (`[f, d2, d3, d22, d23, d33]`)
/// and `curl' h = d2 h3 - d3 h2` with its gradient.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DatumJet {
    pub h2: [f64; 6],
    pub h3: [f64; 6],
    pub curl: f64,
}

impl TangentialDatum {
    pub fn is_zero(&self) -> bool {
        self.chi.iter().chain(&self.g).all(|t| t.c == 0.0)
    }

    pub fn validate(&self) -> crate::Result<()> {
        for t in self.chi.iter().chain(&self.g) {
            if t.m == 0 || t.n == 0 || !t.c.is_finite() {
                return Err(crate::Error::Config(format!("entrance mode ({}, {}) needs indices >= 1 and a finite coefficient", t.m, t.n)));
            }
        }
        Ok(())
    }

    pub fn jet(&self, a: f64, b: f64, x2: f64, x3: f64) -> DatumJet {
        let mut out = DatumJet::default();
        // third-order jets of chi and g: index [i][j] = d2^i d3^j
        let mut acc = |modes: &[FlatMode], p: u32, sign: f64, rot: bool| {
            for t in modes {
                let f = flat_profile(t.m, p, a).jet(x2);
                let g = flat_profile(t.n, p, b).jet(x3);
                let d = |i: usize, j: usize| sign * t.c * f[i] * g[j];
                if rot {
                    // h2 = d3 chi, h3 = -d2 chi
                    let h2 = [d(0, 1), d(1, 1), d(0, 2), d(2, 1), d(1, 2), d(0, 3)];
                    let h3 = [-d(1, 0), -d(2, 0), -d(1, 1), -d(3, 0), -d(2, 1), -d(1, 2)];
                    for k in 0..6 {
                        out.h2[k] += h2[k];
                        out.h3[k] += h3[k];
                    }
                    out.curl -= d(2, 0) + d(0, 2);
                } else {
                    let h2 = [d(1, 0), d(2, 0), d(1, 1), d(3, 0), d(2, 1), d(1, 2)];
                    let h3 = [d(0, 1), d(1, 1), d(0, 2), d(2, 1), d(1, 2), d(0, 3)];
                    for k in 0..6 {
                        out.h2[k] += h2[k];
                        out.h3[k] += h3[k];
                    }
                }
            }
        };
        acc(&self.chi, 2, 1.0, true);
        acc(&self.g, 3, 1.0, false);
        out
    }

    /// Largest violation over wall nodes of: `h = 0`, `dn h = 0`,
    /// `curl' h = 0`, `dn d2 h2 = dn d3 h3 = 0`.
    pub fn compatibility_residual(&self, cs: &CrossSection) -> f64 {
        let mut worst = 0.0f64;
        for &(p, _) in &cs.boundary {
            let (x2, x3) = cs.point(p);
            let j = self.jet(cs.a, cs.b, x2, x3);
            worst = worst.max(j.h2[0].abs()).max(j.h3[0].abs()).max(j.curl.abs());
            for n in cs.edge_normals(p) {
                let dn = |h: &[f64; 6]| (n[0] * h[1] + n[1] * h[2]).abs();
                // dn d2 h2 and dn d3 h3
                let dn2 = (n[0] * j.h2[3] + n[1] * j.h2[4]).abs();
                let dn3 = (n[0] * j.h3[4] + n[1] * j.h3[5]).abs();
                worst = worst.max(dn(&j.h2)).max(dn(&j.h3)).max(dn2).max(dn3);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xsection::build_rectangle;

    fn datum() -> TangentialDatum {
        TangentialDatum {
            chi: vec![FlatMode { m: 1, n: 1, c: 0.7 }, FlatMode { m: 2, n: 3, c: -0.2 }],
            g: vec![FlatMode { m: 2, n: 1, c: 0.4 }],
        }
    }

    #[test]
    fn profiles_are_flat_at_both_ends() {
        for (p, order) in [(2, 3), (3, 4)] {
            for m in 1..5 {
                let s = flat_profile(m, p, 1.7);
                for x in [0.0, 1.7] {
                    let j = s.jet(x);
                    assert!(j[..order].iter().all(|v| v.abs() < 1e-12), "m = {m}, p = {p}: {j:?}");
                }
                // and match sin(m pi t) sin^p(pi t) inside
                let t = 0.37;
                let want = (m as f64 * PI * t).sin() * (PI * t).sin().powi(p as i32);
                assert!((s.jet(1.7 * t)[0] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let d = datum();
        let (a, b, x2, x3, e) = (2.0, PI, 0.71, 1.13, 1e-5);
        let j = d.jet(a, b, x2, x3);
        let f = |u: f64, v: f64| d.jet(a, b, u, v);
        let c2 = |k: usize, comp: usize| {
            let (p, m) = (f(x2 + e, x3), f(x2 - e, x3));
            let (p, m) = if comp == 2 { (p.h2, m.h2) } else { (p.h3, m.h3) };
            (p[k] - m[k]) / (2.0 * e)
        };
        let c3 = |k: usize, comp: usize| {
            let (p, m) = (f(x2, x3 + e), f(x2, x3 - e));
            let (p, m) = if comp == 2 { (p.h2, m.h2) } else { (p.h3, m.h3) };
            (p[k] - m[k]) / (2.0 * e)
        };
        assert!((c2(0, 2) - j.h2[1]).abs() < 1e-8);
        assert!((c3(0, 2) - j.h2[2]).abs() < 1e-8);
        assert!((c2(1, 3) - j.h3[3]).abs() < 1e-7);
        assert!((c3(2, 3) - j.h3[5]).abs() < 1e-7);
        assert!((c2(2, 2) - j.h2[4]).abs() < 1e-7);
        assert!((j.curl - (j.h3[1] - j.h2[2])).abs() < 1e-12);
    }

    #[test]
    fn wall_conditions_hold_and_gradient_part_is_curl_free() {
        let cs = build_rectangle(2.0, PI, 24, 20).unwrap();
        assert!(datum().compatibility_residual(&cs) < 1e-12);
        let g = TangentialDatum { chi: vec![], g: vec![FlatMode { m: 3, n: 2, c: 1.0 }] };
        for p in 0..cs.npts() {
            let (x2, x3) = cs.point(p);
            assert!(g.jet(2.0, PI, x2, x3).curl.abs() < 1e-14);
        }
        // the rotational part does carry vorticity inside
        let r = TangentialDatum { chi: vec![FlatMode { m: 1, n: 1, c: 1.0 }], g: vec![] };
        assert!(r.jet(2.0, PI, 1.0, PI / 2.0).curl.abs() > 0.1);
    }
}
