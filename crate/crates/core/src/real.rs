use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar types that carry derivative information through arithmetic.
///
/// Implemented by `f64` (plain values), [`crate::jet::Jet1D`] (one-variable truncated
/// Taylor data) and [`crate::dual::Dual2`] (value, gradient and Hessian in `n`
/// variables). Expression trees and closure-defined fields are written once against
/// this trait and evaluated with whichever derivative data is needed.
pub trait Real:
    Clone
    + Debug
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
    /// A constant carrying the same derivative layout as `self`.
    fn lift(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
    fn recip(&self) -> Self {
        self.lift(1.0) / self.clone()
    }
    /// Whether every carried number is finite.
    fn is_finite(&self) -> bool;
}

impl Real for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}
