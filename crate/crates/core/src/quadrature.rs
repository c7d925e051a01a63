//! Adaptive Gauss–Kronrod (7/15) quadrature of vector-valued integrands.

use crate::error::{Error, Result};
use crate::linalg::Vector;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Default per-leg absolute tolerance.
pub const DEFAULT_ABS_TOL: f64 = 1e-10;

/// Default cap on the number of subintervals.
pub const DEFAULT_MAX_INTERVALS: usize = 1 << 14;

struct Panel {
    a: f64,
    b: f64,
    value: Vector,
    error: f64,
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<Vector>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = &fc * WGK[7];
    let mut gauss = &fc * WG[3];
    for (i, x) in XGK.iter().take(7).enumerate() {
        let f1 = f(c - h * x)?;
        let f2 = f(c + h * x)?;
        let s = f1 + f2;
        kronrod += &s * WGK[i];
        if i % 2 == 1 {
            gauss += &s * WG[i / 2];
        }
    }
    let value = kronrod * h;
    let error = ((&value - gauss * h).amax()).abs();
    Ok(Panel { a, b, value, error })
}

/// `∫ₐᵇ f` for a vector-valued `f`, bisecting the panel with the largest error estimate
/// until the summed estimate is below `abs_tol` (relaxed to the rounding floor of the
/// result) or `max_intervals` panels are in use.
pub fn integrate<F>(mut f: F, a: f64, b: f64, abs_tol: f64, max_intervals: usize) -> Result<Vector>
where
    F: FnMut(f64) -> Result<Vector>,
{
    if a == b {
        let dim = f(a)?.len();
        return Ok(Vector::zeros(dim));
    }
    let mut panels = vec![gk15(&mut f, a, b)?];
    loop {
        let total: Vector = panels
            .iter()
            .skip(1)
            .fold(panels[0].value.clone(), |acc, p| acc + &p.value);
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let floor = 64.0 * f64::EPSILON * total.amax().max(1.0);
        if err <= abs_tol.max(floor) {
            return Ok(total);
        }
        if panels.len() >= max_intervals {
            return Err(Error::QuadratureFailure {
                tolerance: abs_tol,
                estimate: err,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| {
                if p.error > best.1 {
                    (i, p.error)
                } else {
                    best
                }
            });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(gk15(&mut f, p.a, mid)?);
        panels.push(gk15(&mut f, mid, p.b)?);
    }
}

/// Scalar convenience wrapper.
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let v = integrate(
        |x| Ok(Vector::from_element(1, f(x)?)),
        a,
        b,
        abs_tol,
        DEFAULT_MAX_INTERVALS,
    )?;
    Ok(v[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate_scalar(|x| Ok(x.powi(10) - 3.0 * x), -1.0, 2.0, 1e-12).unwrap();
        let exact = (2f64.powi(11) + 1.0) / 11.0 - 1.5 * (4.0 - 1.0);
        assert_relative_eq!(v, exact, max_relative = 1e-14);
    }

    #[test]
    fn vector_integrand_and_reversed_limits() {
        let v = integrate(
            |x| Ok(Vector::from_vec(vec![x.exp(), x.sin(), 1.0 / (1.0 + x * x)])),
            0.0,
            3.0,
            1e-12,
            DEFAULT_MAX_INTERVALS,
        )
        .unwrap();
        assert_relative_eq!(v[0], 3f64.exp() - 1.0, max_relative = 1e-13);
        assert_relative_eq!(v[1], 1.0 - 3f64.cos(), max_relative = 1e-13);
        assert_relative_eq!(v[2], 3f64.atan(), max_relative = 1e-13);
        let r = integrate_scalar(|x| Ok(x.exp()), 3.0, 0.0, 1e-12).unwrap();
        assert_relative_eq!(r, -(3f64.exp() - 1.0), max_relative = 1e-13);
    }

    #[test]
    fn endpoint_singularity_is_resolved_adaptively() {
        let v = integrate_scalar(|x| Ok(x.sqrt()), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn failure_is_reported() {
        let r = integrate(|x| Ok(Vector::from_element(1, (1.0 / x).sin())), 1e-6, 1.0, 1e-14, 4);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
