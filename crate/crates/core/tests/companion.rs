//! Regular symmetries give first companion coordinates, regular hierarchies give second
//! companion coordinates.

use std::sync::Arc;

use nijhydro::fields::{identity_fn, make_diagonal, scalar, DualOperator, OperatorRef};
use nijhydro::hierarchy::{first_companion_check, hierarchy_from_seed, second_companion_check};
use nijhydro::jordan::standard_hierarchy;
use nijhydro::fields::BlockSpec;
use nijhydro::{Error, Real};

fn nilpotent3() -> DualOperator {
    DualOperator::new(3, |u| {
        let z = u[0].lift(0.0);
        let o = u[0].lift(1.0);
        vec![z.clone(), o.clone(), z.clone(), z.clone(), z.clone(), o, z.clone(), z.clone(), z]
    })
}

#[test]
fn coordinate_symmetry_of_nilpotent_block() {
    // M = u¹N² + u²N + u³Id
    let m = DualOperator::new(3, |u| {
        let z = u[0].lift(0.0);
        vec![
            u[2].clone(), u[1].clone(), u[0].clone(),
            z.clone(), u[2].clone(), u[1].clone(),
            z.clone(), z, u[2].clone(),
        ]
    });
    for p in [[0.3, 0.5, 0.7], [-1.0, 2.0, 0.1]] {
        let r = first_companion_check(&nilpotent3(), &m, &p).unwrap();
        assert!(r.structural_deviation < 1e-8, "{r:?}");
    }
}

#[test]
fn seeded_hierarchy_of_diagonal_operator() {
    let l: OperatorRef = Arc::new(make_diagonal(vec![identity_fn(), identity_fn()]));
    let p = [1.0, 2.0];
    let h = hierarchy_from_seed(l.clone(), scalar(2, |u| u[0].clone() + u[1].clone()), &p).unwrap();
    let r = second_companion_check(l.as_ref(), &h, &p).unwrap();
    assert!(r.structural_deviation < 1e-6, "{r:?}");
}

#[test]
fn standard_hierarchy_of_four_distinct_eigenvalues() {
    let spec = BlockSpec::identity_diagonal(4);
    let h = standard_hierarchy(&spec).unwrap();
    let r = second_companion_check(&spec.operator(), &h, &[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!(r.structural_deviation < 1e-6, "{r:?}");
}

#[test]
fn colliding_eigenvalues_are_not_regular() {
    let spec = BlockSpec::identity_diagonal(4);
    let h = standard_hierarchy(&spec).unwrap();
    let r = second_companion_check(&spec.operator(), &h, &[1.0, 1.0, 3.0, 4.0]);
    assert!(matches!(r, Err(Error::NotRegular)));
}
