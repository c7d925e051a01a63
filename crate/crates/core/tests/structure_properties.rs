//! Structure results for gl-regular Nijenhuis operators, checked at random probes over two
//! corpora: single Toeplitz blocks `U` (k = 2…4) and diagonal operators with distinct
//! eigenvalues.

use std::sync::Arc;

use nijhydro::calculus::{bracket, conservation_law_residual, strong_symmetry_residual, symmetry_residual, t_m_tensor};
use nijhydro::fields::{
    differential, make_companion_second, make_toeplitz, scalar, BlockSpec, FormRef, OperatorField,
    OperatorRef, Polynomial, ProductOperator, ScalarRef, UnivariateRef,
};
use nijhydro::hierarchy::pullback;
use nijhydro::hydro::companion_shift_residual;
use nijhydro::jordan::{compose_conservation_law, compose_symmetry, BlockFunctions, JordanConservationLaw, JordanSymmetry};
use nijhydro::linalg::{a_sequence, cayley_hamilton_residual, char_poly_sigma, is_cyclic, is_nonsingular, Matrix, Vector};
use nijhydro::Real;
use proptest::prelude::*;

struct Case {
    l: OperatorRef,
    m: OperatorRef,
    r: OperatorRef,
    f: ScalarRef,
    u: Vec<f64>,
    label: String,
}

impl std::fmt::Debug for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at {:?}", self.label, self.u)
    }
}

fn poly(c: &[f64]) -> UnivariateRef {
    Arc::new(Polynomial(c.to_vec()))
}

fn coeffs(k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 4), k)
}

fn toeplitz_case() -> impl Strategy<Value = Case> {
    (2usize..=4).prop_flat_map(|k| {
        (coeffs(k), coeffs(k), coeffs(k), prop::collection::vec(0.5..1.5f64, k)).prop_map(move |(a, b, c, u)| Case {
            l: Arc::new(make_toeplitz(k)),
            m: Arc::new(JordanSymmetry::new(a.iter().map(|p| poly(p)).collect())),
            r: Arc::new(JordanSymmetry::new(b.iter().map(|p| poly(p)).collect())),
            f: Arc::new(JordanConservationLaw::new(c.iter().map(|p| poly(p)).collect())),
            label: format!("U{k} M {a:?} R {b:?} f {c:?}"),
            u,
        })
    })
}

fn diagonal_case() -> impl Strategy<Value = Case> {
    (coeffs(3), coeffs(3), coeffs(3), prop::collection::vec(0.0..0.6f64, 3)).prop_map(|(a, b, c, d)| {
        let spec = BlockSpec::identity_diagonal(3);
        let block = |cs: &[Vec<f64>]| -> Vec<BlockFunctions> { cs.iter().map(|p| BlockFunctions::Diagonal(poly(p))).collect() };
        Case {
            l: Arc::new(spec.operator()),
            m: Arc::new(compose_symmetry(&spec, &block(&a)).unwrap()),
            r: Arc::new(compose_symmetry(&spec, &block(&b)).unwrap()),
            f: Arc::new(compose_conservation_law(&spec, &block(&c)).unwrap()),
            label: format!("diag M {a:?} R {b:?} f {c:?}"),
            // eigenvalues stay at least 0.4 apart
            u: d.iter().enumerate().map(|(i, v)| 1.0 + i as f64 + v).collect(),
        }
    })
}

fn corpus() -> impl Strategy<Value = Case> {
    prop_oneof![toeplitz_case(), diagonal_case()]
}

fn value(l: &dyn OperatorField, u: &[f64]) -> Matrix {
    l.eval(u).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn symmetries_are_strong_closed_under_products_and_mutually_symmetric(c in corpus()) {
        let (l, m, r) = (c.l.as_ref(), c.m.as_ref(), c.r.as_ref());
        prop_assert!(symmetry_residual(l, m, &c.u).unwrap() < 1e-7);
        prop_assert!(strong_symmetry_residual(l, m, &c.u).unwrap() < 1e-7);
        let prod = ProductOperator(c.m.clone(), c.r.clone());
        prop_assert!(symmetry_residual(l, &prod, &c.u).unwrap() < 1e-7);
        prop_assert!(bracket(m, r, &c.u).unwrap().max_abs() < 1e-7);
    }

    #[test]
    fn conservation_laws_are_shared_by_symmetries(c in corpus()) {
        prop_assert!(conservation_law_residual(c.l.as_ref(), c.f.as_ref(), &c.u).unwrap() < 1e-9);
        let r = conservation_law_residual(c.m.as_ref(), c.f.as_ref(), &c.u).unwrap();
        prop_assert!(r < 1e-7, "residual {r}");
    }

    #[test]
    fn t_m_commutes_with_l(c in corpus()) {
        let rep = t_m_tensor(c.l.as_ref(), c.m.as_ref(), &c.u).unwrap();
        prop_assert!(rep.defect < 1e-8, "defect {}", rep.defect);
    }

    #[test]
    fn pullback_chain_stays_closed(c in corpus()) {
        let n = c.l.dim();
        let mut w: FormRef = differential(c.f.clone());
        for _ in 0..=n {
            let r = w.eval(&c.u).unwrap().closedness_residual();
            prop_assert!(r < 1e-7, "closedness {r}");
            w = pullback(c.l.clone(), w);
        }
    }

    #[test]
    fn cyclicity_matches_a_sequence_independence(c in corpus(), v in prop::collection::vec(-1.0..1.0f64, 4)) {
        let l = value(c.l.as_ref(), &c.u);
        let n = l.nrows();
        let a = a_sequence(&l).unwrap();
        let a_matrix = |v: &Vector| Matrix::from_fn(n, n, |i, j| (&a[j] * v)[i]);
        let v = Vector::from_column_slice(&v[..n]);
        prop_assert_eq!(is_cyclic(&l, &v), is_nonsingular(&a_matrix(&v)));
        // e₁ is an eigenvector in both corpora.
        let e1 = Vector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 });
        prop_assert!(!is_cyclic(&l, &e1));
        prop_assert!(!is_nonsingular(&a_matrix(&e1)));
    }

    #[test]
    fn cayley_hamilton_closes_the_recursion(c in corpus()) {
        let l = value(c.l.as_ref(), &c.u);
        let a = a_sequence(&l).unwrap();
        prop_assert!(cayley_hamilton_residual(&l, &a, &char_poly_sigma(&l)) < 1e-10);
    }

    #[test]
    fn a_sequence_shifts_the_last_basis_vector_in_companion_form(
        n in 2usize..=5,
        cs in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 5),
        u in prop::collection::vec(-1.0..1.0f64, 5),
    ) {
        let sigma: Vec<ScalarRef> = cs[..n]
            .iter()
            .map(|c| {
                let c = c.clone();
                scalar(n, move |w| w[0].clone() * c[1] + (w[n - 1].clone() * c[2]).sin() + c[0])
            })
            .collect();
        let l = value(&make_companion_second(sigma), &u[..n]);
        let a = a_sequence(&l).unwrap();
        prop_assert!(companion_shift_residual(&a) < 1e-12);
    }
}

#[test]
fn non_symmetry_shows_a_t_m_defect() {
    // Commuting with U but with coefficients violating the symmetry system.
    let l = make_toeplitz(2);
    let m = nijhydro::fields::DualOperator::new(2, |u| {
        let g = u[1].clone() * u[1].clone() * u[0].clone();
        vec![u[0].lift(3.0), g, u[0].lift(0.0), u[0].lift(3.0)]
    });
    let e = nijhydro::calculus::t_m_tensor_unchecked(&l.eval(&[0.7, 1.3]).unwrap(), &m.eval(&[0.7, 1.3]).unwrap()).unwrap();
    assert!(e.defect > 0.01);
    assert!(symmetry_residual(&l, &m, &[0.7, 1.3]).unwrap() > 0.01);
}
