//! Forward-mode automatic differentiation over `(x₁, x₂, x₃, t)`.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number of independent variables: three space coordinates and time.
pub const VARS: usize = 4;
pub const T: usize = 3;

/// Scalar type the manufactured fields are written against.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn value(self) -> f64;
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn value(self) -> f64 {
        self
    }
}

/// Value and first derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    pub d: [f64; VARS],
}

/// Value, first and second derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d: [f64; VARS],
    pub h: [[f64; VARS]; VARS],
}

impl Jet1 {
    pub fn var(v: f64, k: usize) -> Self {
        let mut d = [0.0; VARS];
        d[k] = 1.0;
        Self { v, d }
    }

    /// Apply a scalar function with derivative `f1` at the value.
    fn chain(self, f0: f64, f1: f64) -> Self {
        Self { v: f0, d: self.d.map(|x| f1 * x) }
    }
}

impl Jet2 {
    pub fn var(v: f64, k: usize) -> Self {
        let mut d = [0.0; VARS];
        d[k] = 1.0;
        Self { v, d, h: [[0.0; VARS]; VARS] }
    }

    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut h = [[0.0; VARS]; VARS];
        for a in 0..VARS {
            for b in 0..VARS {
                h[a][b] = f1 * self.h[a][b] + f2 * self.d[a] * self.d[b];
            }
        }
        Self { v: f0, d: self.d.map(|x| f1 * x), h }
    }
}

macro_rules! jet_common {
    ($t:ident) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t {
                self.zip(o, |a, b| a + b)
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t {
                self.zip(o, |a, b| a - b)
            }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                self * -1.0
            }
        }
        impl Add<f64> for $t {
            type Output = $t;
            fn add(mut self, c: f64) -> $t {
                self.v += c;
                self
            }
        }
        impl Sub<f64> for $t {
            type Output = $t;
            fn sub(mut self, c: f64) -> $t {
                self.v -= c;
                self
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, c: f64) -> $t {
                self.scale(c)
            }
        }
        impl Div<f64> for $t {
            type Output = $t;
            fn div(self, c: f64) -> $t {
                self.scale(1.0 / c)
            }
        }
        impl Div for $t {
            type Output = $t;
            fn div(self, o: $t) -> $t {
                self * o.recip()
            }
        }
    };
}

impl Jet1 {
    fn zip(self, o: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut d = [0.0; VARS];
        for k in 0..VARS {
            d[k] = f(self.d[k], o.d[k]);
        }
        Self { v: f(self.v, o.v), d }
    }
    fn scale(self, c: f64) -> Self {
        Self { v: self.v * c, d: self.d.map(|x| x * c) }
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r)
    }
}

impl Jet2 {
    fn zip(self, o: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self { v: f(self.v, o.v), d: [0.0; VARS], h: [[0.0; VARS]; VARS] };
        for a in 0..VARS {
            out.d[a] = f(self.d[a], o.d[a]);
            for b in 0..VARS {
                out.h[a][b] = f(self.h[a][b], o.h[a][b]);
            }
        }
        out
    }
    fn scale(self, c: f64) -> Self {
        Self { v: self.v * c, d: self.d.map(|x| x * c), h: self.h.map(|row| row.map(|x| x * c)) }
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

jet_common!(Jet1);
jet_common!(Jet2);

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, o: Jet1) -> Jet1 {
        let mut d = [0.0; VARS];
        for k in 0..VARS {
            d[k] = self.d[k] * o.v + self.v * o.d[k];
        }
        Jet1 { v: self.v * o.v, d }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let mut out = Jet2 { v: self.v * o.v, d: [0.0; VARS], h: [[0.0; VARS]; VARS] };
        for a in 0..VARS {
            out.d[a] = self.d[a] * o.v + self.v * o.d[a];
            for b in 0..VARS {
                out.h[a][b] = self.h[a][b] * o.v + self.v * o.h[a][b] + self.d[a] * o.d[b] + self.d[b] * o.d[a];
            }
        }
        out
    }
}

impl Real for Jet1 {
    fn cst(v: f64) -> Self {
        Self { v, d: [0.0; VARS] }
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn powf(self, p: f64) -> Self {
        self.chain(self.v.powf(p), p * self.v.powf(p - 1.0))
    }
    fn value(self) -> f64 {
        self.v
    }
}

impl Real for Jet2 {
    fn cst(v: f64) -> Self {
        Self { v, d: [0.0; VARS], h: [[0.0; VARS]; VARS] }
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn powf(self, p: f64) -> Self {
        self.chain(self.v.powf(p), p * self.v.powf(p - 1.0), p * (p - 1.0) * self.v.powf(p - 2.0))
    }
    fn value(self) -> f64 {
        self.v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = Jet2::var(0.7, 0);
        let y = Jet2::var(-1.3, 1);
        let f = (x * y).sin() / (x + 2.0);
        let h = 1e-4;
        let g = |a: f64, b: f64| (a * b).sin() / (a + 2.0);
        let fx = (g(0.7 + h, -1.3) - g(0.7 - h, -1.3)) / (2.0 * h);
        let fxy = (g(0.7 + h, -1.3 + h) - g(0.7 + h, -1.3 - h) - g(0.7 - h, -1.3 + h) + g(0.7 - h, -1.3 - h)) / (4.0 * h * h);
        let fyy = (g(0.7, -1.3 + h) - 2.0 * g(0.7, -1.3) + g(0.7, -1.3 - h)) / (h * h);
        assert!((f.value() - g(0.7, -1.3)).abs() < 1e-15);
        assert!((f.d[0] - fx).abs() < 1e-7);
        assert!((f.h[0][1] - fxy).abs() < 1e-6);
        assert!((f.h[1][1] - fyy).abs() < 1e-5);
        assert_eq!(f.h[0][1], f.h[1][0]);
    }

    #[test]
    fn first_order_jet_agrees_with_second() {
        let a = Jet1::var(0.4, 2);
        let b = Jet2::var(0.4, 2);
        let fa = (a * 3.0).cos().powf(2.0).exp() - a;
        let fb = (b * 3.0).cos().powf(2.0).exp() - b;
        assert!((fa.v - fb.v).abs() < 1e-15);
        assert!((fa.d[2] - fb.d[2]).abs() < 1e-14);
    }
}
