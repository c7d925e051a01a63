//! Two Nijenhuis operators on ℝ³(x, y, z) that are not gl-regular, with their symmetry
//! and conservation-law families and concrete members showing that the gl-regular
//! structure results fail for them.
//!
//! * `first`: the constant operator with nilpotent Jordan blocks of sizes 2 and 1;
//! * `second`: `[[z,0,0],[0,z,1],[0,0,z]]`, two blocks sharing the eigenvalue `z`.

use std::sync::Arc;

use crate::calculus::{conservation_law_residual, strong_symmetry_residual, symmetry_residual};
use crate::dual::Dual2;
use crate::error::Result;
use crate::fields::{differential, scalar, DualOperator, OperatorRef, ProductOperator, ScalarRef};
use crate::hierarchy::pullback;
use crate::real::Real;

/// A free function of the two variables a family is allowed to depend on.
pub type FreeFn = Arc<dyn Fn(&Dual2, &Dual2) -> Dual2 + Send + Sync>;

pub fn free<F>(f: F) -> FreeFn
where
    F: Fn(&Dual2, &Dual2) -> Dual2 + Send + Sync + 'static,
{
    Arc::new(f)
}

pub fn free_const(c: f64) -> FreeFn {
    free(move |p, _| p.lift(c))
}

/// The five free functions `f, g, a, b, c` of a symmetry family.
#[derive(Clone)]
pub struct FamilyParams {
    pub f: FreeFn,
    pub g: FreeFn,
    pub a: FreeFn,
    pub b: FreeFn,
    pub c: FreeFn,
}

impl Default for FamilyParams {
    fn default() -> Self {
        let z = free_const(0.0);
        Self {
            f: z.clone(),
            g: z.clone(),
            a: z.clone(),
            b: z.clone(),
            c: z,
        }
    }
}

impl FamilyParams {
    /// A member with every slot non-trivial.
    pub fn generic() -> Self {
        Self {
            f: free(|p, q| p.sin() + q.clone() * q.clone()),
            g: free(|p, q| p.clone() * q.clone()),
            a: free(|_, q| q.exp()),
            b: free(|p, _| p.clone() * p.clone() + 1.0),
            c: free(|p, q| (p.clone() * q.clone()).cos()),
        }
    }
}

/// `∂ₖd` as a dual number with value and gradient only (enough for operator partials).
fn partial(d: &Dual2, k: usize) -> Dual2 {
    let n = d.dim();
    Dual2 {
        value: d.grad[k],
        grad: (0..n).map(|j| d.hess_at(k, j)).collect(),
        hess: vec![0.0; n * n],
    }
}

pub fn first_operator() -> OperatorRef {
    Arc::new(DualOperator::new(3, |u| {
        let z = u[0].lift(0.0);
        let one = u[0].lift(1.0);
        vec![
            z.clone(), one, z.clone(),
            z.clone(), z.clone(), z.clone(),
            z.clone(), z.clone(), z,
        ]
    }))
}

/// `[[f, x f_y + g, x f_z + a], [0, f, 0], [0, b, c]]`, all functions of `(y, z)`.
pub fn first_symmetry(p: &FamilyParams) -> OperatorRef {
    let p = p.clone();
    Arc::new(DualOperator::new(3, move |u| {
        let (x, y, z) = (&u[0], &u[1], &u[2]);
        let f = (p.f)(y, z);
        let zero = x.lift(0.0);
        vec![
            f.clone(),
            x.clone() * partial(&f, 1) + (p.g)(y, z),
            x.clone() * partial(&f, 2) + (p.a)(y, z),
            zero.clone(),
            f,
            zero.clone(),
            zero,
            (p.b)(y, z),
            (p.c)(y, z),
        ]
    }))
}

/// `x·u(y) + v(y, z)`; `u` receives `y` twice.
pub fn first_conservation_law(u: FreeFn, v: FreeFn) -> ScalarRef {
    scalar(3, move |w| w[0].clone() * u(&w[1], &w[1]) + v(&w[1], &w[2]))
}

pub fn second_operator() -> OperatorRef {
    Arc::new(DualOperator::new(3, |u| {
        let z = u[2].clone();
        let o = z.lift(0.0);
        vec![
            z.clone(), o.clone(), o.clone(),
            o.clone(), z.clone(), z.lift(1.0),
            o.clone(), o, z,
        ]
    }))
}

/// `[[f + a e⁻ʸ, 0, b e⁻ʸ], [f_x + c e⁻ʸ, f, f_z + g e⁻ʸ], [0, 0, f]]`, functions of `(x, z)`.
pub fn second_symmetry(p: &FamilyParams) -> OperatorRef {
    let p = p.clone();
    Arc::new(DualOperator::new(3, move |u| {
        let (x, y, z) = (&u[0], &u[1], &u[2]);
        let e = (-y.clone()).exp();
        let f = (p.f)(x, z);
        let zero = x.lift(0.0);
        vec![
            f.clone() + (p.a)(x, z) * e.clone(),
            zero.clone(),
            (p.b)(x, z) * e.clone(),
            partial(&f, 0) + (p.c)(x, z) * e.clone(),
            f.clone(),
            partial(&f, 2) + (p.g)(x, z) * e,
            zero.clone(),
            zero,
            f,
        ]
    }))
}

/// `a(x, z) eʸ + b(z)`; `b` receives `z` twice.
pub fn second_conservation_law(a: FreeFn, b: FreeFn) -> ScalarRef {
    scalar(3, move |w| a(&w[0], &w[2]) * w[1].exp() + b(&w[2], &w[2]))
}

/// Which structural property a witness breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    /// Every symmetry is strong.
    StrongSymmetry,
    /// Products of symmetries are symmetries.
    ProductClosure,
    /// Conservation laws of `L` are conservation laws of its symmetries.
    SharedConservationLaws,
}

impl Property {
    pub fn label(self) -> &'static str {
        match self {
            Property::StrongSymmetry => "P1",
            Property::ProductClosure => "P2",
            Property::SharedConservationLaws => "P5",
        }
    }
}

/// Residual a witness produces at the witness point, against the bound it must exceed.
#[derive(Debug, Clone)]
pub struct WitnessOutcome {
    pub operator: &'static str,
    pub property: Property,
    pub description: &'static str,
    pub residual: f64,
    pub threshold: f64,
}

impl WitnessOutcome {
    pub fn violated(&self) -> bool {
        self.residual > self.threshold
    }
}

pub const WITNESS_POINT: [f64; 3] = [1.0, 1.0, 1.0];

fn with_f(f: FreeFn) -> FamilyParams {
    FamilyParams {
        f,
        ..FamilyParams::default()
    }
}

/// The pinned witnesses, evaluated at [`WITNESS_POINT`].
pub fn witnesses() -> Result<Vec<WitnessOutcome>> {
    let u = &WITNESS_POINT;
    let mut out = Vec::new();

    let l1 = first_operator();
    let m_z = first_symmetry(&with_f(free(|_, z| z.clone())));
    out.push(WitnessOutcome {
        operator: "first",
        property: Property::StrongSymmetry,
        description: "symmetry with f = z",
        residual: strong_symmetry_residual(l1.as_ref(), m_z.as_ref(), u)?,
        threshold: 0.1,
    });
    let m_b = first_symmetry(&FamilyParams {
        b: free_const(1.0),
        ..FamilyParams::default()
    });
    let prod: OperatorRef = Arc::new(ProductOperator(m_z.clone(), m_b));
    out.push(WitnessOutcome {
        operator: "first",
        property: Property::ProductClosure,
        description: "product of the symmetries f = z and b = 1",
        residual: symmetry_residual(l1.as_ref(), prod.as_ref(), u)?,
        threshold: 0.01,
    });
    let cl = first_conservation_law(free(|y, _| y.lift(0.0)), free(|y, z| y.clone() * z.clone()));
    out.push(WitnessOutcome {
        operator: "first",
        property: Property::SharedConservationLaws,
        description: "conservation law yz against the symmetry f = z",
        residual: pullback(m_z, differential(cl)).eval(u)?.closedness_residual(),
        threshold: 0.01,
    });

    let l2 = second_operator();
    let m_a = second_symmetry(&FamilyParams {
        a: free_const(1.0),
        ..FamilyParams::default()
    });
    out.push(WitnessOutcome {
        operator: "second",
        property: Property::StrongSymmetry,
        description: "symmetry with a = 1",
        residual: strong_symmetry_residual(l2.as_ref(), m_a.as_ref(), u)?,
        threshold: 0.1,
    });
    let sq: OperatorRef = Arc::new(ProductOperator(m_a.clone(), m_a.clone()));
    out.push(WitnessOutcome {
        operator: "second",
        property: Property::ProductClosure,
        description: "square of the symmetry a = 1",
        residual: symmetry_residual(l2.as_ref(), sq.as_ref(), u)?,
        threshold: 0.01,
    });
    let cl = second_conservation_law(free(|x, _| x.clone()), free_const(0.0));
    let m_g = second_symmetry(&FamilyParams {
        g: free_const(1.0),
        ..FamilyParams::default()
    });
    out.push(WitnessOutcome {
        operator: "second",
        property: Property::SharedConservationLaws,
        description: "conservation law x·eʸ against the symmetry g = 1",
        residual: pullback(m_g, differential(cl)).eval(u)?.closedness_residual(),
        threshold: 0.01,
    });
    Ok(out)
}

/// Largest symmetry residual of the generic family members of both operators, and the
/// largest conservation-law residual of generic family members, over `probes`.
pub fn family_residuals(probes: &[Vec<f64>]) -> Result<(f64, f64)> {
    let p = FamilyParams::generic();
    let pairs = [
        (first_operator(), first_symmetry(&p)),
        (second_operator(), second_symmetry(&p)),
    ];
    let laws = [
        (
            first_operator(),
            first_conservation_law(free(|y, _| y.sin()), free(|y, z| y.clone() * z.exp())),
        ),
        (
            second_operator(),
            second_conservation_law(free(|x, z| x.clone() * z.cos()), free(|z, _| z.clone() * z.clone())),
        ),
    ];
    let mut sym: f64 = 0.0;
    let mut cl: f64 = 0.0;
    for u in probes {
        for (l, m) in &pairs {
            sym = sym.max(symmetry_residual(l.as_ref(), m.as_ref(), u)?);
        }
        for (l, f) in &laws {
            cl = cl.max(conservation_law_residual(l.as_ref(), f.as_ref(), u)?);
        }
    }
    Ok((sym, cl))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_gl_regular;

    #[test]
    fn operators_are_nijenhuis_but_not_gl_regular() {
        for l in [first_operator(), second_operator()] {
            let u = [0.3, -0.7, 1.2];
            assert!(crate::calculus::torsion_residual(l.as_ref(), &u).unwrap() < 1e-14);
            assert!(!is_gl_regular(&l.eval(&u).unwrap().value).regular);
        }
    }

    #[test]
    fn strong_members_are_strong() {
        // f = f(y) for the first operator, a = c = 0 for the second.
        let p = FamilyParams {
            f: free(|y, _| y.exp()),
            g: free(|y, z| y.clone() * z.clone()),
            ..FamilyParams::default()
        };
        let u = [0.4, 0.9, -0.3];
        let r = strong_symmetry_residual(first_operator().as_ref(), first_symmetry(&p).as_ref(), &u).unwrap();
        assert!(r < 1e-12);
        let r = strong_symmetry_residual(second_operator().as_ref(), second_symmetry(&p).as_ref(), &u).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn non_member_is_not_a_conservation_law() {
        let f = scalar(3, |w| w[0].clone() * w[1].clone());
        let r = conservation_law_residual(second_operator().as_ref(), f.as_ref(), &WITNESS_POINT).unwrap();
        assert!(r > 0.1);
    }

    #[test]
    fn pinned_witnesses_hold() {
        let ws = witnesses().unwrap();
        assert_eq!(ws.len(), 6);
        let expected = [1.0, 1.0, 2.0, (-1.0f64).exp(), 0.5 * (-2.0f64).exp(), 1.0];
        for (w, e) in ws.iter().zip(expected) {
            assert!(w.violated(), "{w:?}");
            assert!((w.residual - e).abs() < 1e-12, "{w:?} expected {e}");
        }
    }
}
