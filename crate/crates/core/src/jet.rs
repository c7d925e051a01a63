//! Truncated Taylor arithmetic in one variable.
//!
//! A [`Jet1D`] of order `m` stores the Taylor coefficients `f⁽ᵏ⁾(s₀)/k!` for
//! `k = 0..=m`. All operations are exact truncations of the corresponding power
//! series, so Leibniz and Faà di Bruno rules hold by construction.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet1D {
    base: f64,
    coeffs: Vec<f64>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl Jet1D {
    /// Jet of the identity function `s ↦ s` at `base`.
    pub fn variable(base: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = base;
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        Self { base, coeffs }
    }

    pub fn constant(value: f64, base: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { base, coeffs }
    }

    /// Builds a jet from Taylor coefficients `f⁽ᵏ⁾/k!`.
    pub fn from_taylor(base: f64, coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least the value");
        Self { base, coeffs }
    }

    /// Builds a jet from plain derivatives `f, f', f'', …`.
    pub fn from_derivatives(base: f64, derivs: &[f64]) -> Self {
        assert!(!derivs.is_empty(), "a jet needs at least the value");
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(k, d)| d / factorial(k))
            .collect();
        Self { base, coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn taylor(&self) -> &[f64] {
        &self.coeffs
    }

    /// `k`-th derivative at the base point (zero beyond the stored order).
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeffs.get(k).map_or(0.0, |c| c * factorial(k))
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..=self.order()).map(|k| self.derivative(k)).collect()
    }

    /// Drops coefficients beyond `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, 0.0);
        Self { base: self.base, coeffs }
    }

    /// Jet of `f'` (one order lower).
    pub fn differentiate(&self) -> Self {
        if self.order() == 0 {
            return Self::constant(0.0, self.base, 0);
        }
        let coeffs = (1..=self.order())
            .map(|k| self.coeffs[k] * k as f64)
            .collect();
        Self { base: self.base, coeffs }
    }

    fn zip_order(&self, other: &Self) -> usize {
        self.order().min(other.order())
    }

    /// Composition `outer ∘ self`, where `outer` is the jet of the outer function at
    /// `self.value()`. Horner evaluation of the outer series in `(self - value)`.
    pub fn compose(&self, outer: &Jet1D) -> Jet1D {
        let m = self.order().min(outer.order());
        let mut shift = self.truncate(m);
        shift.coeffs[0] = 0.0;
        let mut acc = Jet1D::constant(outer.coeffs[m], self.base, m);
        for k in (0..m).rev() {
            acc = acc * shift.clone();
            acc.coeffs[0] += outer.coeffs[k];
        }
        acc
    }

    /// Evaluates the truncated series at `base + h`.
    pub fn eval_at(&self, h: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * h + c)
    }

    fn map_series(&self, f: impl FnOnce(&[f64], &mut [f64])) -> Self {
        let mut out = vec![0.0; self.coeffs.len()];
        f(&self.coeffs, &mut out);
        Self {
            base: self.base,
            coeffs: out,
        }
    }
}

impl Add for Jet1D {
    type Output = Jet1D;
    fn add(self, rhs: Jet1D) -> Jet1D {
        let m = self.zip_order(&rhs);
        let coeffs = (0..=m).map(|k| self.coeffs[k] + rhs.coeffs[k]).collect();
        Jet1D { base: self.base, coeffs }
    }
}

impl Sub for Jet1D {
    type Output = Jet1D;
    fn sub(self, rhs: Jet1D) -> Jet1D {
        let m = self.zip_order(&rhs);
        let coeffs = (0..=m).map(|k| self.coeffs[k] - rhs.coeffs[k]).collect();
        Jet1D { base: self.base, coeffs }
    }
}

impl Mul for Jet1D {
    type Output = Jet1D;
    fn mul(self, rhs: Jet1D) -> Jet1D {
        let m = self.zip_order(&rhs);
        let coeffs = (0..=m)
            .map(|k| (0..=k).map(|j| self.coeffs[j] * rhs.coeffs[k - j]).sum())
            .collect();
        Jet1D { base: self.base, coeffs }
    }
}

impl Div for Jet1D {
    type Output = Jet1D;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet1D) -> Jet1D {
        self * Real::recip(&rhs)
    }
}

impl Neg for Jet1D {
    type Output = Jet1D;
    fn neg(self) -> Jet1D {
        self.map_series(|a, out| {
            for (o, x) in out.iter_mut().zip(a) {
                *o = -x;
            }
        })
    }
}

impl Add<f64> for Jet1D {
    type Output = Jet1D;
    fn add(mut self, rhs: f64) -> Jet1D {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet1D {
    type Output = Jet1D;
    fn sub(mut self, rhs: f64) -> Jet1D {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet1D {
    type Output = Jet1D;
    fn mul(mut self, rhs: f64) -> Jet1D {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl Div<f64> for Jet1D {
    type Output = Jet1D;
    fn div(mut self, rhs: f64) -> Jet1D {
        self.coeffs.iter_mut().for_each(|c| *c /= rhs);
        self
    }
}

impl Real for Jet1D {
    fn lift(&self, c: f64) -> Self {
        Jet1D::constant(c, self.base, self.order())
    }

    fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn recip(&self) -> Self {
        self.map_series(|a, b| {
            b[0] = 1.0 / a[0];
            for k in 1..a.len() {
                let s: f64 = (1..=k).map(|j| a[j] * b[k - j]).sum();
                b[k] = -s / a[0];
            }
        })
    }

    fn exp(&self) -> Self {
        self.map_series(|a, e| {
            e[0] = a[0].exp();
            for k in 1..a.len() {
                let s: f64 = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum();
                e[k] = s / k as f64;
            }
        })
    }

    fn ln(&self) -> Self {
        self.map_series(|a, l| {
            l[0] = a[0].ln();
            for k in 1..a.len() {
                let s: f64 = (1..k).map(|j| j as f64 * l[j] * a[k - j]).sum();
                l[k] = (a[k] - s / k as f64) / a[0];
            }
        })
    }

    fn sin(&self) -> Self {
        sin_cos(self).0
    }

    fn cos(&self) -> Self {
        sin_cos(self).1
    }

    fn powi(&self, n: i32) -> Self {
        let mut base = if n < 0 { self.recip() } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = self.lift(1.0);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }

    fn powf(&self, p: f64) -> Self {
        self.map_series(|a, b| {
            b[0] = a[0].powf(p);
            for k in 1..a.len() {
                let s: f64 = (1..=k)
                    .map(|j| ((p + 1.0) * j as f64 - k as f64) * a[j] * b[k - j])
                    .sum();
                b[k] = s / (k as f64 * a[0]);
            }
        })
    }

    fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}

fn sin_cos(a: &Jet1D) -> (Jet1D, Jet1D) {
    let n = a.coeffs.len();
    let mut s = vec![0.0; n];
    let mut c = vec![0.0; n];
    s[0] = a.coeffs[0].sin();
    c[0] = a.coeffs[0].cos();
    for k in 1..n {
        let mut ss = 0.0;
        let mut cc = 0.0;
        for j in 1..=k {
            let w = j as f64 * a.coeffs[j];
            ss += w * c[k - j];
            cc += w * s[k - j];
        }
        s[k] = ss / k as f64;
        c[k] = -cc / k as f64;
    }
    (
        Jet1D { base: a.base, coeffs: s },
        Jet1D { base: a.base, coeffs: c },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Central finite differences of a closed-form function, used as an independent oracle.
    fn fd_derivs(f: impl Fn(f64) -> f64, s: f64, order: usize) -> Vec<f64> {
        let h: f64 = 1e-2;
        (0..=order)
            .map(|k| {
                let mut acc = 0.0;
                for j in 0..=k {
                    let binom = factorial(k) / (factorial(j) * factorial(k - j));
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binom * f(s + (k as f64 / 2.0 - j as f64) * h);
                }
                acc / h.powi(k as i32)
            })
            .collect()
    }

    #[test]
    fn product_rule_matches_finite_differences() {
        let s = 0.7;
        let x = Jet1D::variable(s, 3);
        let j = x.clone().sin() * x.exp();
        let fd = fd_derivs(|t| t.sin() * t.exp(), s, 3);
        for k in 0..=3 {
            assert_relative_eq!(j.derivative(k), fd[k], epsilon = 1e-3, max_relative = 1e-3);
        }
    }

    #[test]
    fn composition_matches_analytic_derivatives_to_order_four() {
        // h(g(s)) with g = s^2 + 1, h = exp: derivatives of exp(s^2+1) in closed form.
        let s: f64 = 0.3;
        let g = Jet1D::variable(s, 4).powi(2) + 1.0;
        let outer = Jet1D::variable(g.value(), 4).exp();
        let composed = g.compose(&outer);
        let e = (s * s + 1.0).exp();
        let exact = [
            e,
            2.0 * s * e,
            (2.0 + 4.0 * s * s) * e,
            (12.0 * s + 8.0 * s.powi(3)) * e,
            (12.0 + 48.0 * s * s + 16.0 * s.powi(4)) * e,
        ];
        for (k, ex) in exact.iter().enumerate() {
            assert_relative_eq!(composed.derivative(k), ex, max_relative = 1e-12);
        }
        // Direct jet evaluation agrees with composition.
        let direct = (Jet1D::variable(s, 4).powi(2) + 1.0).exp();
        for k in 0..=4 {
            assert_relative_eq!(composed.derivative(k), direct.derivative(k), max_relative = 1e-12);
        }
    }

    #[test]
    fn sin_composition_and_polynomial() {
        let s: f64 = -0.4;
        let x = Jet1D::variable(s, 4);
        let p = x.clone() * x.clone() * x.clone() - x.clone() * 2.0;
        let j = p.sin();
        let fd = fd_derivs(|t: f64| (t.powi(3) - 2.0 * t).sin(), s, 4);
        for k in 0..=4 {
            assert_relative_eq!(j.derivative(k), fd[k], epsilon = 5e-3, max_relative = 5e-3);
        }
    }

    #[test]
    fn reciprocal_ln_and_powf() {
        let s = 1.7;
        let x = Jet1D::variable(s, 4);
        let r = x.recip();
        let l = x.ln();
        let p = x.powf(1.5);
        for k in 0..=4 {
            let kf = factorial(k);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_relative_eq!(r.derivative(k), sign * kf / s.powi(k as i32 + 1), max_relative = 1e-12);
        }
        assert_relative_eq!(l.derivative(3), 2.0 / s.powi(3), max_relative = 1e-12);
        assert_relative_eq!(p.derivative(2), 0.75 * s.powf(-0.5), max_relative = 1e-12);
    }

    #[test]
    fn differentiate_and_eval() {
        let x = Jet1D::variable(2.0, 3);
        let cube = x.powi(3);
        let d = cube.differentiate();
        assert_relative_eq!(d.value(), 12.0);
        assert_relative_eq!(d.derivative(1), 12.0);
        assert_relative_eq!(cube.eval_at(0.5), 2.5f64.powi(3), max_relative = 1e-14);
    }
}
