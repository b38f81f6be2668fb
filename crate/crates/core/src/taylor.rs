//! Truncated Taylor arithmetic for forward-mode derivatives.
//!
//! A [`Jet`] stores normalized Taylor coefficients `c_k = f^(k)(t) / k!` up to
//! [`MAX_ORDER`]. All operations propagate the full coefficient vector; callers
//! that need fewer orders simply ignore the tail.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest derivative order carried by a [`Jet`].
pub const MAX_ORDER: usize = 4;
const LEN: usize = MAX_ORDER + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub coeffs: [f64; LEN],
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        let mut coeffs = [0.0; LEN];
        coeffs[0] = value;
        Jet { coeffs }
    }

    /// The independent variable evaluated at `t`.
    pub fn variable(t: f64) -> Self {
        let mut coeffs = [0.0; LEN];
        coeffs[0] = t;
        coeffs[1] = 1.0;
        Jet { coeffs }
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `k`-th derivative (`k!·c_k`).
    pub fn derivative(&self, k: usize) -> f64 {
        let mut fact = 1.0;
        for i in 2..=k {
            fact *= i as f64;
        }
        self.coeffs[k] * fact
    }

    /// Value followed by derivatives `1..=order`.
    pub fn derivatives(&self, order: usize) -> Vec<f64> {
        (0..=order.min(MAX_ORDER)).map(|k| self.derivative(k)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn exp(&self) -> Self {
        let a = &self.coeffs;
        let mut b = [0.0; LEN];
        b[0] = a[0].exp();
        for k in 1..LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * b[k - j];
            }
            b[k] = acc / k as f64;
        }
        Jet { coeffs: b }
    }

    /// Natural logarithm; the caller guarantees a positive value.
    pub fn ln(&self) -> Self {
        let a = &self.coeffs;
        let mut b = [0.0; LEN];
        b[0] = a[0].ln();
        for k in 1..LEN {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * b[j] * a[k - j];
            }
            b[k] = (a[k] - acc / k as f64) / a[0];
        }
        Jet { coeffs: b }
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let a = &self.coeffs;
        let mut s = [0.0; LEN];
        let mut c = [0.0; LEN];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..LEN {
            let mut acc_s = 0.0;
            let mut acc_c = 0.0;
            for j in 1..=k {
                let w = j as f64 * a[j];
                acc_s += w * c[k - j];
                acc_c += w * s[k - j];
            }
            s[k] = acc_s / k as f64;
            c[k] = -acc_c / k as f64;
        }
        (Jet { coeffs: s }, Jet { coeffs: c })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    pub fn tanh(&self) -> Self {
        // t' = (1 - t^2) a'
        let a = &self.coeffs;
        let mut t = [0.0; LEN];
        let mut w = [0.0; LEN];
        t[0] = a[0].tanh();
        w[0] = 1.0 - t[0] * t[0];
        for k in 1..LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * w[k - j];
            }
            t[k] = acc / k as f64;
            let mut sq = 0.0;
            for i in 0..=k {
                sq += t[i] * t[k - i];
            }
            w[k] = -sq;
        }
        Jet { coeffs: t }
    }

    /// Square root; the caller guarantees a positive value.
    pub fn sqrt(&self) -> Self {
        let a = &self.coeffs;
        let mut r = [0.0; LEN];
        r[0] = a[0].sqrt();
        for k in 1..LEN {
            let mut acc = 0.0;
            for j in 1..k {
                acc += r[j] * r[k - j];
            }
            r[k] = (a[k] - acc) / (2.0 * r[0]);
        }
        Jet { coeffs: r }
    }

    /// Integer power by repeated squaring; exact for polynomials.
    pub fn powi(&self, n: i64) -> Self {
        if n < 0 {
            return Jet::constant(1.0) / self.powi(-n);
        }
        let mut result = Jet::constant(1.0);
        let mut base = *self;
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result * base;
            }
            base = base * base;
            e >>= 1;
        }
        result
    }

    /// `self^exponent` through `exp(exponent·ln self)`; needs a positive base.
    pub fn powj(&self, exponent: &Jet) -> Self {
        (*exponent * self.ln()).exp()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for (c, r) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *c += r;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for (c, r) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *c -= r;
        }
        self
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
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = [0.0; LEN];
        for k in 0..LEN {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.coeffs[j] * rhs.coeffs[k - j];
            }
            out[k] = acc;
        }
        Jet { coeffs: out }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let v = &rhs.coeffs;
        let mut q = [0.0; LEN];
        for k in 0..LEN {
            let mut acc = self.coeffs[k];
            for j in 1..=k {
                acc -= v[j] * q[k - j];
            }
            q[k] = acc / v[0];
        }
        Jet { coeffs: q }
    }
}
