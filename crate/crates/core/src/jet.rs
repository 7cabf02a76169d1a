//! Truncated Taylor series ("jets") for exact derivatives of composite
//! one-dimensional expressions.
//!
//! A `Jet` stores `c[k] = f^(k)(x0) / k!` for `k < ORDER`. Arithmetic follows
//! the usual recurrences for products, quotients, `exp`, `ln` and powers.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number of stored Taylor coefficients (derivatives 0..=6).
pub const ORDER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub c: [f64; ORDER],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = v;
        Jet { c }
    }

    /// The independent variable seeded at `x0`.
    pub fn variable(x0: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = x0;
        c[1] = 1.0;
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative at the expansion point.
    pub fn deriv(&self, k: usize) -> f64 {
        self.c[k] * factorial(k)
    }

    pub fn derivs<const K: usize>(&self) -> [f64; K] {
        let mut out = [0.0; K];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.deriv(k);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|v| *v *= s);
        Jet { c }
    }

    pub fn recip(&self) -> Self {
        Jet::constant(1.0) / *self
    }

    pub fn exp(&self) -> Self {
        let mut e = [0.0; ORDER];
        e[0] = self.c[0].exp();
        for k in 1..ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.c[j] * e[k - j];
            }
            e[k] = s / k as f64;
        }
        Jet { c: e }
    }

    pub fn ln(&self) -> Self {
        let a = self.c;
        let mut l = [0.0; ORDER];
        l[0] = a[0].ln();
        for k in 1..ORDER {
            let mut s = k as f64 * a[k];
            for j in 1..k {
                s -= j as f64 * l[j] * a[k - j];
            }
            l[k] = s / (k as f64 * a[0]);
        }
        Jet { c: l }
    }

    /// `self^p` for a positive base value.
    pub fn powf(&self, p: f64) -> Self {
        let a = self.c;
        let mut r = [0.0; ORDER];
        r[0] = a[0].powf(p);
        for k in 1..ORDER {
            let mut s = 0.0;
            for j in 1..=k {
                s += (p * j as f64 - (k - j) as f64) * a[j] * r[k - j];
            }
            r[k] = s / (k as f64 * a[0]);
        }
        Jet { c: r }
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    /// Antiderivative with value `c0` at the expansion point.
    pub fn integrate(&self, c0: f64) -> Self {
        let mut c = [0.0; ORDER];
        c[0] = c0;
        for k in 1..ORDER {
            c[k] = self.c[k - 1] / k as f64;
        }
        Jet { c }
    }

    /// Derivative series (the top coefficient is lost).
    pub fn differentiate(&self) -> Self {
        let mut c = [0.0; ORDER];
        for k in 0..ORDER - 1 {
            c[k] = self.c[k + 1] * (k + 1) as f64;
        }
        Jet { c }
    }

    /// Evaluate the polynomial at offset `t` from the expansion point.
    pub fn eval_at(&self, t: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &v| acc * t + v)
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, i| a * i as f64)
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut c = self.c;
        for k in 0..ORDER {
            c[k] += o.c[k];
        }
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let mut c = self.c;
        for k in 0..ORDER {
            c[k] -= o.c[k];
        }
        Jet { c }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; ORDER];
        for i in 0..ORDER {
            for j in 0..ORDER - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let mut q = [0.0; ORDER];
        for k in 0..ORDER {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= o.c[j] * q[k - j];
            }
            q[k] = s / o.c[0];
        }
        Jet { c: q }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        let mut c = self.c;
        c[0] += o;
        Jet { c }
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, o: f64) -> Jet {
        let mut c = self.c;
        c[0] -= o;
        Jet { c }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        self.scale(o)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, o: f64) -> Jet {
        self.scale(1.0 / o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_of_sin_like_polynomial() {
        // d^k/dx^k exp(2x) = 2^k exp(2x)
        let x = Jet::variable(0.3);
        let e = (x * 2.0).exp();
        for k in 0..ORDER {
            assert_relative_eq!(e.deriv(k), 2f64.powi(k as i32) * 0.6f64.exp(), max_relative = 1e-13);
        }
    }

    #[test]
    fn powf_matches_falling_factorial() {
        let x = Jet::variable(1.7);
        let p = -0.4;
        let r = x.powf(p);
        let mut coef = 1.0;
        for k in 0..ORDER {
            assert_relative_eq!(r.deriv(k), coef * 1.7f64.powf(p - k as f64), max_relative = 1e-12);
            coef *= p - k as f64;
        }
    }

    #[test]
    fn quotient_and_log_roundtrip() {
        let x = Jet::variable(0.8);
        let f = (x * x + 1.0) / (x + 2.0);
        let g = f.ln().exp();
        for k in 0..ORDER {
            assert_relative_eq!(f.c[k], g.c[k], epsilon = 1e-13);
        }
    }

    #[test]
    fn integrate_then_differentiate() {
        let x = Jet::variable(0.2);
        let f = (x * 3.0).exp();
        let d = f.integrate(5.0).differentiate();
        for k in 0..ORDER - 1 {
            assert_relative_eq!(d.c[k], f.c[k], max_relative = 1e-14);
        }
    }
}
