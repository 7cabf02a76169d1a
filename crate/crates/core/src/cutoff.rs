//! Smooth cutoff functions built from the `exp(-1/t)` bump.
//!
//! All axial cutoffs used by the solvers live in [`Cutoff`]; each one is a
//! non-increasing step from 1 to 0 across a stated interval.

use crate::jet::Jet;

/// Smooth monotone step: 0 for `t <= 0`, 1 for `t >= 1`, C-infinity in between.
pub fn smooth_step(t: Jet) -> Jet {
    let t0 = t.value();
    // Below these thresholds every derivative is under 1e-20.
    if t0 <= 0.01 {
        return Jet::constant(0.0);
    }
    if t0 >= 0.99 {
        return Jet::constant(1.0);
    }
    let g = t.recip() - (Jet::constant(1.0) - t).recip();
    (g.exp() + 1.0).recip()
}

pub fn smooth_step_f64(t: f64) -> f64 {
    smooth_step(Jet::constant(t)).value()
}

/// The cutoff registry. Each variant equals 1 left of `start` and 0 right of `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// Entrance lift cutoff: 1 on `[L0, 19/20 L0]`, 0 on `[9/10 L0, L1]`.
    Eta0 { l0: f64 },
    /// Coefficient blend for the leading coefficient: 1 up to `L1 + 2l`, 0 from `L1 + 4l`.
    Zeta1 { l1: f64 },
    /// Coefficient blend for the first-order coefficient: 1 up to `L1 + l`, 0 from `L1 + 2l`.
    Zeta2 { l1: f64 },
}

impl Cutoff {
    /// Transition interval `(start, end)`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Cutoff::Eta0 { l0 } => (0.95 * l0, 0.9 * l0),
            Cutoff::Zeta1 { l1 } => {
                let ell = l1 / 20.0;
                (l1 + 2.0 * ell, l1 + 4.0 * ell)
            }
            Cutoff::Zeta2 { l1 } => {
                let ell = l1 / 20.0;
                (l1 + ell, l1 + 2.0 * ell)
            }
        }
    }

    pub fn eval_jet(&self, x: Jet) -> Jet {
        let (a, b) = self.support();
        let t = (x - a) / (b - a);
        Jet::constant(1.0) - smooth_step(t)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_jet(Jet::constant(x)).value()
    }

    /// Value and first derivative.
    pub fn eval_d(&self, x: f64) -> (f64, f64) {
        let j = self.eval_jet(Jet::variable(x));
        (j.deriv(0), j.deriv(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_limits_and_midpoint() {
        assert_eq!(smooth_step_f64(-1.0), 0.0);
        assert_eq!(smooth_step_f64(2.0), 1.0);
        assert!((smooth_step_f64(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn step_is_symmetric() {
        for i in 1..50 {
            let t = i as f64 / 50.0;
            let s = smooth_step_f64(t) + smooth_step_f64(1.0 - t);
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cutoffs_are_monotone_with_stated_supports() {
        let cs = [Cutoff::Eta0 { l0: -1.0 }, Cutoff::Zeta1 { l1: 0.5 }, Cutoff::Zeta2 { l1: 0.5 }];
        for c in cs {
            let (a, b) = c.support();
            assert!(a < b);
            assert_eq!(c.eval(a - 1e-3), 1.0);
            assert_eq!(c.eval(b + 1e-3), 0.0);
            for i in 0..=200 {
                let x = a + (b - a) * i as f64 / 200.0;
                assert!(c.eval_d(x).1 <= 0.0);
            }
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let c = Cutoff::Zeta1 { l1: 0.5 };
        let x = 0.57;
        let h = 1e-6;
        let fd = (c.eval(x + h) - c.eval(x - h)) / (2.0 * h);
        assert!((fd - c.eval_d(x).1).abs() < 1e-6);
    }
}
