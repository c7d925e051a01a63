//! Planted data recovered through the block machinery and through the curve pipeline.

use std::sync::Arc;

use nijhydro::fields::{
    shift_matrix, univariate, Block, BlockSpec, ComponentCurve, Curve, OperatorField, Polynomial, UnivariateRef,
};
use nijhydro::jordan::{compose_symmetry, jordan_symmetry, BlockFunctions};
use nijhydro::linalg::{commutant_coeffs, max_abs, Vector};
use nijhydro::solver::{extend_symmetry, extract_block_functions, extension_residual, ExtractionOptions};
use nijhydro::{Real, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn planted(k: usize, shift: f64) -> Vec<UnivariateRef> {
    (0..k)
        .map(|i| {
            let a = 0.3 + 0.2 * i as f64 + shift;
            univariate(move |s| (s.clone() * a).sin() + s.clone() * s * (0.1 * i as f64) + 1.0)
        })
        .collect()
}

#[test]
fn block_functions_are_recovered_on_the_eigenvalue_axis() {
    for k in 1..=4 {
        let fs = planted(k, 0.0);
        let n = shift_matrix(k);
        for s in [-0.7, 0.2, 1.3] {
            let mut u = vec![0.0; k];
            u[k - 1] = s;
            let m = jordan_symmetry(&fs, &u).unwrap();
            let g = commutant_coeffs(&n, &m).unwrap();
            for i in 0..k {
                let expect = fs[i].value(s).unwrap();
                assert!((g.get(i + 1) - expect).abs() < 1e-8, "k={k} i={i}");
            }
            assert!(max_abs(&(g.reconstruct(&n) - m)) < 1e-8);
        }
    }
}

fn random_curve(rng: &mut ChaCha8Rng, centres: &[f64]) -> ComponentCurve {
    let comps = centres
        .iter()
        .map(|c| {
            let p = Polynomial(vec![c + rng.gen_range(-0.1..0.1), rng.gen_range(0.8..1.2), rng.gen_range(-0.2..0.2)]);
            Arc::new(p) as UnivariateRef
        })
        .collect();
    ComponentCurve::new(comps, (-0.5, 0.5))
}

#[test]
fn planted_symmetry_survives_extraction_and_extension() {
    // Jordan pair ⊕ 1×1 block; eigenvalue coordinates u² and u³ stay well apart.
    let spec = BlockSpec::new(vec![Block::JordanToeplitz(2), Block::Diagonal1(univariate(|s| s))]);
    let l = spec.operator();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..3 {
        let fns = vec![
            BlockFunctions::Jordan(planted(2, 0.1 * trial as f64)),
            BlockFunctions::Diagonal(planted(1, 0.5)[0].clone()),
        ];
        let truth = compose_symmetry(&spec, &fns).unwrap();
        let curve = random_curve(&mut rng, &[1.0, 0.0, 3.0]);
        let xi = |x: f64| -> Result<Vector> {
            Ok(truth.value(&curve.point(x)?)? * Vector::from_vec(curve.velocity(x)?))
        };
        let data = extract_block_functions(&spec, &l, &curve, &xi, (-0.5, 0.5), &ExtractionOptions::default()).unwrap();
        let m = extend_symmetry(&data, &spec).unwrap();
        assert!(extension_residual(m.as_ref(), &data.frames).unwrap() < 1e-8);
        let mid = curve.point(0.0).unwrap();
        for _ in 0..10 {
            // Off the curve, eigenvalue coordinates inside the sampled range.
            let u = [
                mid[0] + rng.gen_range(-1.0..1.0),
                mid[1] + rng.gen_range(-0.2..0.2),
                mid[2] + rng.gen_range(-0.2..0.2),
            ];
            let d = max_abs(&(m.value(&u).unwrap() - truth.value(&u).unwrap()));
            assert!(d < 1e-5, "trial {trial}: {d} at {u:?}");
        }
    }
}
