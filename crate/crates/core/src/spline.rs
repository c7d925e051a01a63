//! Not-a-knot cubic splines used as sampled one-variable functions with jets up to order 3.

use crate::error::{Error, Result};
use crate::fields::Univariate;
use crate::jet::Jet1D;

/// Highest derivative a cubic spline supplies.
pub const SPLINE_MAX_ORDER: usize = 3;

/// Cubic interpolant of `(knots, values)` with continuous third derivative at the second and
/// penultimate knots.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    // Second derivatives at the knots.
    moments: Vec<f64>,
}

impl CubicSpline {
    /// Knots may be given in either order; they must be distinct and at least four.
    pub fn new(knots: &[f64], values: &[f64]) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: knots.len(),
                got: values.len(),
            });
        }
        if knots.len() < 4 {
            return Err(Error::SmoothnessDeficit(format!(
                "a cubic spline needs at least 4 samples, got {}",
                knots.len()
            )));
        }
        let mut pairs: Vec<(f64, f64)> = knots.iter().copied().zip(values.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::SmoothnessDeficit("spline knots are not distinct".into()));
        }
        let moments = not_a_knot_moments(&x, &y);
        Ok(Self {
            knots: x,
            values: y,
            moments,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().expect("non-empty"))
    }

    /// `[s, s', s'', s''']` at `s`.
    pub fn derivatives(&self, s: f64) -> Result<[f64; 4]> {
        let (lo, hi) = self.range();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(s >= lo - slack && s <= hi + slack) {
            return Err(Error::OutOfSampledRange { value: s, lo, hi });
        }
        let x = &self.knots;
        let i = match x.partition_point(|k| *k <= s) {
            0 => 0,
            p => (p - 1).min(x.len() - 2),
        };
        let h = x[i + 1] - x[i];
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let t = s - x[i];
        let slope = (self.values[i + 1] - self.values[i]) / h - h * (2.0 * m0 + m1) / 6.0;
        let third = (m1 - m0) / h;
        Ok([
            self.values[i] + t * (slope + t * (0.5 * m0 + t * third / 6.0)),
            slope + t * (m0 + 0.5 * t * third),
            m0 + t * third,
            third,
        ])
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        Ok(self.derivatives(s)?[0])
    }
}

fn not_a_knot_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..m - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    // Unknowns M₁…M_{m−2}; M₀ and M_{m−1} are eliminated by the not-a-knot conditions.
    let k = m - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for r in 0..k {
        let i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * (d[i] - d[i - 1]);
    }
    let (h0, h1) = (h[0], h[1]);
    diag[0] += h0 * (1.0 + h0 / h1);
    sup[0] -= h0 * h0 / h1;
    let (ha, hb) = (h[m - 3], h[m - 2]);
    diag[k - 1] += hb * (1.0 + hb / ha);
    sub[k - 1] -= hb * hb / ha;
    let inner = thomas(&sub, &diag, &sup, &rhs);
    let mut moments = Vec::with_capacity(m);
    moments.push(inner[0] * (1.0 + h0 / h1) - inner[1] * h0 / h1);
    moments.extend_from_slice(&inner);
    moments.push(inner[k - 1] * (1.0 + hb / ha) - inner[k - 2] * hb / ha);
    moments
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut out = vec![0.0; n];
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
    out
}

impl Univariate for CubicSpline {
    fn jet(&self, s: f64, order: usize) -> Result<Jet1D> {
        if order > SPLINE_MAX_ORDER {
            return Err(Error::SmoothnessDeficit(format!(
                "derivative of order {order} requested from a cubic spline"
            )));
        }
        let d = self.derivatives(s)?;
        Ok(Jet1D::from_derivatives(s, &d[..=order]))
    }

    fn max_order(&self) -> usize {
        SPLINE_MAX_ORDER
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, m: usize) -> Vec<f64> {
        (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
    }

    #[test]
    fn reproduces_cubics_exactly() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x + 0.25 * x * x * x;
        let x = vec![-1.0, -0.7, 0.1, 0.3, 1.2, 2.0];
        let y: Vec<f64> = x.iter().map(|v| p(*v)).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        for t in grid(-1.0, 2.0, 31) {
            let d = s.derivatives(t).unwrap();
            assert!((d[0] - p(t)).abs() < 1e-12);
            assert!((d[1] - (-2.0 + t + 0.75 * t * t)).abs() < 1e-11);
            assert!((d[2] - (1.0 + 1.5 * t)).abs() < 1e-10);
            assert!((d[3] - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn four_points_give_the_interpolating_cubic() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.powi(3)).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        assert!((s.eval(1.5).unwrap() - 3.375).abs() < 1e-12);
    }

    #[test]
    fn smooth_function_converges_at_fourth_order() {
        let err = |m: usize| {
            let x = grid(0.0, 2.0, m);
            let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
            let s = CubicSpline::new(&x, &y).unwrap();
            grid(0.0, 2.0, 997)
                .into_iter()
                .map(|t| (s.eval(t).unwrap() - t.sin()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(41), err(81));
        assert!(e2 < 1e-7);
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn unsorted_input_and_range_errors() {
        let x = [3.0, 0.0, 2.0, 1.0];
        let y = [9.0, 0.0, 4.0, 1.0];
        let s = CubicSpline::new(&x, &y).unwrap();
        assert_eq!(s.range(), (0.0, 3.0));
        assert!(matches!(s.eval(3.5), Err(Error::OutOfSampledRange { .. })));
        assert!(matches!(s.jet(1.0, 4), Err(Error::SmoothnessDeficit(_))));
        assert!(CubicSpline::new(&[0.0, 1.0, 1.0, 2.0], &[0.0; 4]).is_err());
        assert!(CubicSpline::new(&[0.0, 1.0, 2.0], &[0.0; 3]).is_err());
    }

    #[test]
    fn jets_carry_taylor_coefficients() {
        let x = grid(0.0, 1.0, 9);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let s = CubicSpline::new(&x, &y).unwrap();
        let j = s.jet(0.5, 2).unwrap();
        assert!((j.value() - 0.25).abs() < 1e-14);
        assert!((j.derivative(1) - 1.0).abs() < 1e-12);
        assert!((j.derivative(2) - 2.0).abs() < 1e-10);
    }
}
