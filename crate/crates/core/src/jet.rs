//! Second-order forward-mode jets: a value together with its gradient and
//! Hessian with respect to up to [`MAX_DIM`] variables.
//!
//! Closed-form metrics evaluate their component expressions on jets, which
//! yields exact first and second partial derivatives without symbolic
//! differentiation.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::linalg::{Matrix, Vector, MAX_DIM, ZERO_MAT, ZERO_VEC};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: Vector,
    pub h: Matrix,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet {
            v,
            d: ZERO_VEC,
            h: ZERO_MAT,
        }
    }

    /// The coordinate function `x_index` evaluated at `v`.
    pub fn var(v: f64, index: usize) -> Self {
        let mut d = ZERO_VEC;
        d[index] = 1.0;
        Jet { v, d, h: ZERO_MAT }
    }

    pub fn vars(x: &[f64]) -> Vec<Jet> {
        x.iter().enumerate().map(|(i, &xi)| Jet::var(xi, i)).collect()
    }

    /// Compose with a scalar function given its value and first two
    /// derivatives at `self.v`.
    #[inline]
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f0);
        for i in 0..MAX_DIM {
            out.d[i] = f1 * self.d[i];
            for j in 0..MAX_DIM {
                out.h[i][j] = f1 * self.h[i][j] + f2 * self.d[i] * self.d[j];
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Jet {
        let mut out = *self;
        out.v *= c;
        for i in 0..MAX_DIM {
            out.d[i] *= c;
            for j in 0..MAX_DIM {
                out.h[i][j] *= c;
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let u = self.v;
        self.chain(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tan(&self) -> Jet {
        let t = self.v.tan();
        let sec2 = 1.0 + t * t;
        self.chain(t, sec2, 2.0 * t * sec2)
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }

    pub fn tanh(&self) -> Jet {
        let t = self.v.tanh();
        let sech2 = 1.0 - t * t;
        self.chain(t, sech2, -2.0 * t * sech2)
    }

    pub fn exp(&self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Jet {
        let u = self.v;
        self.chain(u.ln(), 1.0 / u, -1.0 / (u * u))
    }

    pub fn sqrt(&self) -> Jet {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn abs(&self) -> Jet {
        if self.v < 0.0 {
            -*self
        } else {
            *self
        }
    }

    pub fn atan(&self) -> Jet {
        let u = self.v;
        let q = 1.0 / (1.0 + u * u);
        self.chain(u.atan(), q, -2.0 * u * q * q)
    }

    /// `self^p` for a constant exponent. Integer exponents accept negative
    /// bases.
    pub fn powf(&self, p: f64) -> Jet {
        let u = self.v;
        if p == 0.0 {
            return Jet::constant(1.0);
        }
        if p == 1.0 {
            return *self;
        }
        if p == 2.0 {
            return *self * *self;
        }
        if p.fract() == 0.0 && p > 0.0 && p <= 16.0 {
            let mut acc = *self;
            for _ in 1..(p as usize) {
                acc = acc * *self;
            }
            return acc;
        }
        self.chain(u.powf(p), p * u.powf(p - 1.0), p * (p - 1.0) * u.powf(p - 2.0))
    }

    /// General power `self^other` via `exp(other·ln self)`.
    pub fn pow(&self, other: &Jet) -> Jet {
        if other.d.iter().all(|&x| x == 0.0) && other.h.iter().flatten().all(|&x| x == 0.0) {
            return self.powf(other.v);
        }
        (self.ln() * *other).exp()
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    #[inline]
    fn add(self, o: Jet) -> Jet {
        let mut out = self;
        out.v += o.v;
        for i in 0..MAX_DIM {
            out.d[i] += o.d[i];
            for j in 0..MAX_DIM {
                out.h[i][j] += o.h[i][j];
            }
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    #[inline]
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    #[inline]
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    #[inline]
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for i in 0..MAX_DIM {
            out.d[i] = self.v * o.d[i] + o.v * self.d[i];
            for j in 0..MAX_DIM {
                out.h[i][j] = self.v * o.h[i][j] + o.v * self.h[i][j] + self.d[i] * o.d[j] + o.d[i] * self.d[j];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(&[Jet]) -> Jet, x: &[f64]) {
        let n = x.len();
        let jet = f(&Jet::vars(x));
        let val = |y: &[f64]| {
            let vars: Vec<Jet> = y.iter().map(|&v| Jet::constant(v)).collect();
            f(&vars).v
        };
        let h = 1e-4;
        for i in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let d = (val(&xp) - val(&xm)) / (2.0 * h);
            assert!((d - jet.d[i]).abs() < 1e-6, "d[{i}]: {d} vs {}", jet.d[i]);
            for j in 0..n {
                let mut pp = x.to_vec();
                let mut pm = x.to_vec();
                let mut mp = x.to_vec();
                let mut mm = x.to_vec();
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                let dd = (val(&pp) - val(&pm) - val(&mp) + val(&mm)) / (4.0 * h * h);
                assert!((dd - jet.h[i][j]).abs() < 1e-5, "h[{i}][{j}]: {dd} vs {}", jet.h[i][j]);
            }
        }
    }

    #[test]
    fn products_and_quotients() {
        fd_check(|v| v[0] * v[1].sin() / (v[2] * v[2] + 1.0), &[0.3, 1.2, -0.7]);
    }

    #[test]
    fn transcendental_chain() {
        fd_check(|v| (v[0].cosh() + v[1].exp()).sqrt().ln() * v[1].tanh(), &[0.4, -0.2]);
        fd_check(|v| v[0].powf(3.0) - v[1].powf(-2.0) + v[0].pow(&v[1]), &[1.3, 0.8]);
    }
}
