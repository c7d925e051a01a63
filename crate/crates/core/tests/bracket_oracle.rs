//! The coordinate formulas for torsion and `⟨L, M⟩` against their vector-field
//! definitions, evaluated with finite-difference Lie brackets of random polynomial fields.

use std::sync::Arc;

use nijhydro::calculus::{bracket, torsion};
use nijhydro::fields::{make_toeplitz, DualOperator, OperatorRef, Polynomial};
use nijhydro::jordan::JordanSymmetry;
use nijhydro::linalg::{Matrix, Vector};
use nijhydro::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Field = Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>;

/// Quadratic vector field with random coefficients.
fn random_field(n: usize, rng: &mut ChaCha8Rng) -> Field {
    let c: Vec<f64> = (0..n * (1 + n + n * n)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Arc::new(move |u: &[f64]| {
        Vector::from_fn(n, |i, _| {
            let b = &c[i * (1 + n + n * n)..];
            let mut v = b[0];
            for j in 0..n {
                v += b[1 + j] * u[j];
                for k in 0..n {
                    v += b[1 + n + j * n + k] * u[j] * u[k];
                }
            }
            v
        })
    })
}

fn apply(l: &OperatorRef, a: &Field) -> Field {
    let (l, a) = (l.clone(), a.clone());
    Arc::new(move |u: &[f64]| l.eval(u).unwrap().value * a(u))
}

fn jacobian(a: &Field, u: &[f64]) -> Matrix {
    let n = u.len();
    let h = 1e-4;
    let mut j = Matrix::zeros(n, n);
    for k in 0..n {
        let (mut p, mut m) = (u.to_vec(), u.to_vec());
        p[k] += h;
        m[k] -= h;
        j.set_column(k, &((a(&p) - a(&m)) / (2.0 * h)));
    }
    j
}

fn lie(a: &Field, b: &Field, u: &[f64]) -> Vector {
    jacobian(b, u) * a(u) - jacobian(a, u) * b(u)
}

/// `M[Lξ,η] + L[ξ,Mη] − [Lξ,Mη] − LM[ξ,η]`.
fn bracket_by_definition(l: &OperatorRef, m: &OperatorRef, xi: &Field, eta: &Field, u: &[f64]) -> Vector {
    let (lv, mv) = (l.eval(u).unwrap().value, m.eval(u).unwrap().value);
    let (lxi, meta) = (apply(l, xi), apply(m, eta));
    &mv * lie(&lxi, eta, u) + &lv * lie(xi, &meta, u) - lie(&lxi, &meta, u) - &lv * &mv * lie(xi, eta, u)
}

/// `L²[ξ,η] − L[Lξ,η] − L[ξ,Lη] + [Lξ,Lη]`.
fn torsion_by_definition(l: &OperatorRef, xi: &Field, eta: &Field, u: &[f64]) -> Vector {
    let lv = l.eval(u).unwrap().value;
    let (lxi, leta) = (apply(l, xi), apply(l, eta));
    &lv * &lv * lie(xi, eta, u) - &lv * lie(&lxi, eta, u) - &lv * lie(xi, &leta, u) + lie(&lxi, &leta, u)
}

fn generic_2d() -> OperatorRef {
    Arc::new(DualOperator::new(2, |u| {
        vec![u[0].clone() * u[1].clone(), u[1].exp(), u[0].sin(), u[1].clone()]
    }))
}

fn generic_3d() -> OperatorRef {
    Arc::new(DualOperator::new(3, |u| {
        let (a, b, c) = (&u[0], &u[1], &u[2]);
        vec![
            a.clone() * b.clone(), c.clone(), a.lift(1.0),
            b.sin(), a.clone() + c.clone(), b.clone() * b.clone(),
            c.exp(), a.lift(0.5), a.clone() * c.clone(),
        ]
    }))
}

#[test]
fn torsion_formula_matches_the_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ops = [generic_2d(), generic_3d(), Arc::new(make_toeplitz(3)) as OperatorRef];
    for l in &ops {
        let n = l.dim();
        for _ in 0..5 {
            let (xi, eta) = (random_field(n, &mut rng), random_field(n, &mut rng));
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let t = torsion(l.as_ref(), &u).unwrap().apply(&xi(&u), &eta(&u));
            let d = torsion_by_definition(l, &xi, &eta, &u);
            let err = (&t - &d).amax();
            assert!(err < 1e-6 * (1.0 + d.amax()), "n={n}: {t} vs {d}");
        }
    }
}

#[test]
fn bracket_formula_matches_the_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let toeplitz: OperatorRef = Arc::new(make_toeplitz(3));
    let sym: OperatorRef = Arc::new(JordanSymmetry::new(vec![
        Arc::new(Polynomial(vec![0.2, -0.4, 0.3])),
        Arc::new(Polynomial(vec![1.0, 0.5, 0.0, 0.1])),
        Arc::new(Polynomial(vec![0.0, 1.0, -0.7])),
    ]));
    // A commuting pair that is not a symmetry: M = g(u)·L.
    let l2 = generic_2d();
    let scaled: OperatorRef = Arc::new(DualOperator::new(2, |u| {
        let g = u[0].clone() * u[0].clone() + u[1].cos();
        let v = vec![u[0].clone() * u[1].clone(), u[1].exp(), u[0].sin(), u[1].clone()];
        v.into_iter().map(|e| e * g.clone()).collect()
    }));
    let pairs = [(toeplitz.clone(), sym.clone()), (sym, toeplitz), (l2.clone(), scaled), (l2.clone(), l2)];
    let mut nonzero = 0;
    for (l, m) in &pairs {
        let n = l.dim();
        for _ in 0..5 {
            let (xi, eta) = (random_field(n, &mut rng), random_field(n, &mut rng));
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.3..0.9)).collect();
            let t = bracket(l.as_ref(), m.as_ref(), &u).unwrap().apply(&xi(&u), &eta(&u));
            let d = bracket_by_definition(l, m, &xi, &eta, &u);
            assert!((&t - &d).amax() < 1e-6 * (1.0 + d.amax()), "{t} vs {d}");
            if d.amax() > 1e-3 {
                nonzero += 1;
            }
        }
    }
    // The non-symmetric pairs exercise every term.
    assert!(nonzero >= 10);
}

#[test]
fn nilpotent_corner_field_is_torsion_free_but_the_flip_is_not() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let corner: OperatorRef = Arc::new(DualOperator::new(2, |u| {
        let z = u[0].lift(0.0);
        vec![z.clone(), u[1].clone(), z.clone(), z]
    }));
    let flip: OperatorRef = Arc::new(DualOperator::new(2, |u| {
        let z = u[0].lift(0.0);
        vec![z.clone(), u[0].clone(), u[1].clone(), z]
    }));
    let u = [1.0, 1.0];
    assert!(torsion(corner.as_ref(), &u).unwrap().max_abs() < 1e-14);
    let t = torsion(flip.as_ref(), &u).unwrap();
    assert!(t.max_abs() > 0.1);
    let (xi, eta) = (random_field(2, &mut rng), random_field(2, &mut rng));
    let d = torsion_by_definition(&flip, &xi, &eta, &u);
    assert!((t.apply(&xi(&u), &eta(&u)) - d).amax() < 1e-6);
}
