//! Forward-mode second-order differentiation in `n` variables.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::real::Real;

/// Value, gradient and (row-major, symmetric) Hessian of a scalar function of `n`
/// variables at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Dual2 {
    pub fn constant(value: f64, n: usize) -> Self {
        Self {
            value,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        }
    }

    /// The coordinate function `u ↦ uⁱ`.
    pub fn variable(value: f64, i: usize, n: usize) -> Self {
        let mut d = Self::constant(value, n);
        d.grad[i] = 1.0;
        d
    }

    /// Seeds all `n` coordinate variables at `u`.
    pub fn variables(u: &[f64]) -> Vec<Self> {
        let n = u.len();
        u.iter()
            .enumerate()
            .map(|(i, &v)| Self::variable(v, i, n))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    /// Applies a univariate function given its value and first two derivatives at
    /// `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.dim();
        let grad = self.grad.iter().map(|g| f1 * g).collect();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = f1 * self.hess[i * n + j] + f2 * self.grad[i] * self.grad[j];
            }
        }
        Self {
            value: f0,
            grad,
            hess,
        }
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(mut self, rhs: Dual2) -> Dual2 {
        self.value += rhs.value;
        self.grad.iter_mut().zip(&rhs.grad).for_each(|(a, b)| *a += b);
        self.hess.iter_mut().zip(&rhs.hess).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(mut self, rhs: Dual2) -> Dual2 {
        self.value -= rhs.value;
        self.grad.iter_mut().zip(&rhs.grad).for_each(|(a, b)| *a -= b);
        self.hess.iter_mut().zip(&rhs.hess).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, rhs: Dual2) -> Dual2 {
        let n = self.dim();
        let grad = (0..n)
            .map(|i| self.value * rhs.grad[i] + rhs.value * self.grad[i])
            .collect();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                hess[k] = self.value * rhs.hess[k]
                    + rhs.value * self.hess[k]
                    + self.grad[i] * rhs.grad[j]
                    + rhs.grad[i] * self.grad[j];
            }
        }
        Dual2 {
            value: self.value * rhs.value,
            grad,
            hess,
        }
    }
}

impl Div for Dual2 {
    type Output = Dual2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Dual2) -> Dual2 {
        self * rhs.recip()
    }
}

impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        self * -1.0
    }
}

impl Add<f64> for Dual2 {
    type Output = Dual2;
    fn add(mut self, rhs: f64) -> Dual2 {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for Dual2 {
    type Output = Dual2;
    fn sub(mut self, rhs: f64) -> Dual2 {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for Dual2 {
    type Output = Dual2;
    fn mul(mut self, rhs: f64) -> Dual2 {
        self.value *= rhs;
        self.grad.iter_mut().for_each(|g| *g *= rhs);
        self.hess.iter_mut().for_each(|h| *h *= rhs);
        self
    }
}

impl Div<f64> for Dual2 {
    type Output = Dual2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: f64) -> Dual2 {
        self * (1.0 / rhs)
    }
}

impl Real for Dual2 {
    fn lift(&self, c: f64) -> Self {
        Dual2::constant(c, self.dim())
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn recip(&self) -> Self {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }
    fn ln(&self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }
    fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }
    fn powi(&self, n: i32) -> Self {
        let v = self.value;
        let nf = n as f64;
        let f1 = if n == 0 { 0.0 } else { nf * v.powi(n - 1) };
        let f2 = if n == 0 || n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * v.powi(n - 2)
        };
        self.chain(v.powi(n), f1, f2)
    }
    fn powf(&self, p: f64) -> Self {
        let v = self.value;
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }
    fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hessian_of_product_and_exp() {
        // f(x, y) = x y exp(x)
        let v = Dual2::variables(&[0.5, 2.0]);
        let f = v[0].clone() * v[1].clone() * v[0].exp();
        let (x, y) = (0.5f64, 2.0f64);
        let e = x.exp();
        assert_relative_eq!(f.value, x * y * e);
        assert_relative_eq!(f.grad[0], y * e * (1.0 + x), max_relative = 1e-14);
        assert_relative_eq!(f.grad[1], x * e, max_relative = 1e-14);
        assert_relative_eq!(f.hess_at(0, 0), y * e * (2.0 + x), max_relative = 1e-14);
        assert_relative_eq!(f.hess_at(0, 1), e * (1.0 + x), max_relative = 1e-14);
        assert_relative_eq!(f.hess_at(1, 0), f.hess_at(0, 1));
        assert_relative_eq!(f.hess_at(1, 1), 0.0);
    }

    #[test]
    fn quotient_and_powers() {
        let v = Dual2::variables(&[3.0, 1.5]);
        let f = v[1].clone() / v[0].clone() + v[0].powi(3) - v[1].sqrt();
        let (x, y) = (3.0f64, 1.5f64);
        assert_relative_eq!(f.grad[0], -y / (x * x) + 3.0 * x * x, max_relative = 1e-14);
        assert_relative_eq!(f.hess_at(0, 0), 2.0 * y / x.powi(3) + 6.0 * x, max_relative = 1e-14);
        assert_relative_eq!(f.hess_at(1, 1), 0.25 * y.powf(-1.5), max_relative = 1e-14);
        assert_relative_eq!(f.hess_at(0, 1), -1.0 / (x * x), max_relative = 1e-14);
    }
}
