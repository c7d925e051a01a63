use std::io::Write;
use std::sync::Arc;

use nijhydro::calculus::torsion_residual;
use nijhydro::counterexamples::{family_residuals, witnesses};
use nijhydro::fields::{
    identity_fn, make_companion_second, make_diagonal, make_toeplitz, scalar, toeplitz_value, Block, BlockSpec,
    DomainBox, DualOperator, OperatorField, OperatorRef, Polynomial, ScalarRef, UnivariateRef,
};
use nijhydro::hierarchy::{first_companion_check, hierarchy_from_seed, second_companion_check};
use nijhydro::hydro::companion_shift_residual;
use nijhydro::jordan::{jordan_symmetry, standard_hierarchy};
use nijhydro::linalg::{a_sequence_signed, commutant_coeffs, max_abs, Matrix};
use nijhydro::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{probe_points, RunOptions};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Deliberate corruption of the corpus, used to confirm the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Flip the sign of `σᵢ` in the recursion `Aᵢ = L Aᵢ₋₁ − σᵢ Id`.
    RecursionSign,
}

type Outcome = std::result::Result<String, String>;

struct Item {
    name: &'static str,
    run: fn(&mut ChaCha8Rng, f64) -> Outcome,
}

fn bound(what: &str, value: f64, limit: f64) -> Outcome {
    if value < limit {
        Ok(format!("{what} {value:.2e} < {limit:.0e}"))
    } else {
        Err(format!("{what} {value:.3e} exceeds {limit:.0e}"))
    }
}

fn err(e: nijhydro::Error) -> String {
    e.to_string()
}

fn random_poly(rng: &mut ChaCha8Rng) -> UnivariateRef {
    Arc::new(Polynomial((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()))
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn random_comp2(rng: &mut ChaCha8Rng, n: usize) -> OperatorRef {
    let sigma: Vec<ScalarRef> = (0..n)
        .map(|_| {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            scalar(n, move |w| w[0].clone() * c[1] + (w[n - 1].clone() * c[2]).sin() + c[0])
        })
        .collect();
    Arc::new(make_companion_second(sigma))
}

fn block_corpus() -> Vec<BlockSpec> {
    vec![
        BlockSpec::new(vec![Block::JordanToeplitz(3)]),
        BlockSpec::identity_diagonal(4),
        BlockSpec::new(vec![Block::JordanToeplitz(2), Block::JordanToeplitz(2)]),
        BlockSpec::new(vec![Block::Diagonal1(identity_fn()), Block::JordanToeplitz(2)]),
    ]
}

/// A point where the blocks of `spec` have eigenvalues near 1, 2, 3, … .
fn block_point(rng: &mut ChaCha8Rng, spec: &BlockSpec) -> Vec<f64> {
    let mut u = random_point(rng, spec.dim(), 0.2, 0.8);
    for b in 0..spec.len() {
        u[spec.eigen_coordinate_index(b)] = 1.0 + b as f64 + rng.gen_range(0.0..0.5);
    }
    u
}

fn torsion_item(rng: &mut ChaCha8Rng, _: f64) -> Outcome {
    let mut ops: Vec<(OperatorRef, DomainBox)> = (2..=5)
        .map(|k| (Arc::new(make_toeplitz(k)) as OperatorRef, DomainBox::cube(k, -2.0, 2.0)))
        .collect();
    for spec in block_corpus() {
        let n = spec.dim();
        ops.push((Arc::new(spec.operator()), DomainBox::cube(n, 0.5, 3.5)));
    }
    let mut worst: f64 = 0.0;
    for (l, d) in &ops {
        for _ in 0..20 {
            worst = worst.max(torsion_residual(l.as_ref(), &d.sample(rng)).map_err(err)?);
        }
    }
    bound("max torsion", worst, 1e-9)
}

fn families_item(rng: &mut ChaCha8Rng, _: f64) -> Outcome {
    let probes = probe_points(&DomainBox::cube(3, -1.5, 1.5), &[], 20, rng.gen());
    let (sym, cl) = family_residuals(&probes).map_err(err)?;
    bound("symmetry families", sym, 1e-9)?;
    bound("conservation-law families", cl, 1e-9)?;
    Ok(format!("symmetry {sym:.2e}, conservation laws {cl:.2e} at 20 probes"))
}

fn witnesses_item(_: &mut ChaCha8Rng, _: f64) -> Outcome {
    let ws = witnesses().map_err(err)?;
    for w in &ws {
        if !w.violated() {
            return Err(format!(
                "{} operator, {} ({}): residual {:.3e} does not exceed {}",
                w.operator,
                w.property.label(),
                w.description,
                w.residual,
                w.threshold
            ));
        }
    }
    let summary: Vec<String> = ws
        .iter()
        .map(|w| format!("{} {} {:.2e}", w.operator, w.property.label(), w.residual))
        .collect();
    Ok(format!("all violated: {}", summary.join(", ")))
}

fn jordan_round_trip_item(rng: &mut ChaCha8Rng, _: f64) -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 1..=4 {
        for _ in 0..10 {
            let fs: Vec<UnivariateRef> = (0..k).map(|_| random_poly(rng)).collect();
            let u = random_point(rng, k, 0.5, 1.5);
            let l = toeplitz_value(&u);
            let m = jordan_symmetry(&fs, &u).map_err(err)?;
            let g = commutant_coeffs(&l, &m).map_err(err)?;
            worst = worst.max(max_abs(&(g.reconstruct(&l) - &m)) / (1.0 + max_abs(&m)));
        }
    }
    bound("relative round-trip error", worst, 1e-8)
}

fn corpus_matrices(rng: &mut ChaCha8Rng) -> Result<Vec<Matrix>, String> {
    let mut out = Vec::new();
    for k in 2..=5 {
        out.push(toeplitz_value(&random_point(rng, k, 0.5, 1.5)));
    }
    for spec in block_corpus() {
        let u = block_point(rng, &spec);
        out.push(spec.operator().value(&u).map_err(err)?);
    }
    for n in 2..=5 {
        out.push(random_comp2(rng, n).value(&random_point(rng, n, -1.0, 1.0)).map_err(err)?);
    }
    Ok(out)
}

fn cayley_hamilton_item(rng: &mut ChaCha8Rng, sign: f64) -> Outcome {
    let mut count = 0;
    for l in corpus_matrices(rng)? {
        a_sequence_signed(&l, sign).map_err(|e| format!("{}×{} matrix: {e}", l.nrows(), l.ncols()))?;
        count += 1;
    }
    Ok(format!("L·Aₙ₋₁ = σₙ Id on {count} matrices"))
}

fn companion_shift_item(rng: &mut ChaCha8Rng, sign: f64) -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        for _ in 0..5 {
            let l = random_comp2(rng, n).value(&random_point(rng, n, -1.0, 1.0)).map_err(err)?;
            worst = worst.max(companion_shift_residual(&a_sequence_signed(&l, sign).map_err(err)?));
        }
    }
    bound("Aᵢeₙ = eₙ₋ᵢ deviation", worst, 1e-12)
}

fn hierarchy_item(rng: &mut ChaCha8Rng, _: f64) -> Outcome {
    let mut worst_closed: f64 = 0.0;
    let mut worst_chain: f64 = 0.0;
    for spec in block_corpus() {
        let l = spec.operator();
        let h = standard_hierarchy(&spec).map_err(err)?;
        let probes: Vec<Vec<f64>> = (0..10).map(|_| block_point(rng, &spec)).collect();
        worst_chain = worst_chain.max(h.check_chain(&l, &probes).map_err(err)?);
        for u in &probes {
            worst_closed = worst_closed.max(h.closedness_residual(u).map_err(err)?);
        }
    }
    let u2: OperatorRef = Arc::new(make_toeplitz(2));
    let seeded = hierarchy_from_seed(u2.clone(), scalar(2, |u| u[0].clone() * u[1].clone()), &[1.0, 0.5]).map_err(err)?;
    let probes: Vec<Vec<f64>> = (0..10).map(|_| random_point(rng, 2, 0.7, 1.3)).collect();
    worst_chain = worst_chain.max(seeded.check_chain(u2.as_ref(), &probes).map_err(err)?);
    bound("closedness", worst_closed, 1e-7)?;
    Ok(format!("max chain residual {worst_chain:.2e}, closedness {worst_closed:.2e}"))
}

fn companion_coordinates_item(_: &mut ChaCha8Rng, _: f64) -> Outcome {
    let n3 = DualOperator::new(3, |u| {
        let z = u[0].lift(0.0);
        let o = u[0].lift(1.0);
        vec![z.clone(), o.clone(), z.clone(), z.clone(), z.clone(), o, z.clone(), z.clone(), z]
    });
    // M = u¹N² + u²N + u³Id
    let m = DualOperator::new(3, |u| {
        let z = u[0].lift(0.0);
        vec![
            u[2].clone(), u[1].clone(), u[0].clone(),
            z.clone(), u[2].clone(), u[1].clone(),
            z.clone(), z, u[2].clone(),
        ]
    });
    let r1 = first_companion_check(&n3, &m, &[0.3, 0.5, 0.7]).map_err(err)?;
    bound("first companion deviation", r1.structural_deviation, 1e-8)?;
    let l: OperatorRef = Arc::new(make_diagonal(vec![identity_fn(), identity_fn()]));
    let p = [1.0, 2.0];
    let h = hierarchy_from_seed(l.clone(), scalar(2, |u| u[0].clone() + u[1].clone()), &p).map_err(err)?;
    let r2 = second_companion_check(l.as_ref(), &h, &p).map_err(err)?;
    bound("second companion deviation", r2.structural_deviation, 1e-6)?;
    Ok(format!(
        "first {:.2e}, second {:.2e}",
        r1.structural_deviation, r2.structural_deviation
    ))
}

const ITEMS: &[Item] = &[
    Item { name: "torsion of Toeplitz and block operators", run: torsion_item },
    Item { name: "counterexample families", run: families_item },
    Item { name: "counterexample witnesses (P1, P2, P5)", run: witnesses_item },
    Item { name: "Jordan round trips", run: jordan_round_trip_item },
    Item { name: "Cayley–Hamilton closure", run: cayley_hamilton_item },
    Item { name: "companion A-sequence shift", run: companion_shift_item },
    Item { name: "hierarchy chains", run: hierarchy_item },
    Item { name: "companion coordinates", run: companion_coordinates_item },
];

/// Runs the built-in corpus, stopping at the first failing item.
pub fn run_selftest(config: Option<&RunConfig>, opts: &RunOptions, out: &mut dyn Write) -> Result<()> {
    let seed = opts.seed.or(config.map(|c| c.seed)).unwrap_or(0);
    let sign = match opts.fault {
        Some(Fault::RecursionSign) => 1.0,
        None => -1.0,
    };
    let io = |e| CliError::Io {
        path: "stdout".into(),
        source: e,
    };
    writeln!(out, "selftest — seed {seed}{}", if opts.fault.is_some() { ", fault injected" } else { "" }).map_err(io)?;
    for (i, item) in ITEMS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        match (item.run)(&mut rng, sign) {
            Ok(detail) => writeln!(out, "PASS  {}: {detail}", item.name).map_err(io)?,
            Err(detail) => {
                writeln!(out, "FAIL  {}: {detail}", item.name).map_err(io)?;
                return Err(CliError::Failed(format!("self-test item `{}` failed: {detail}", item.name)));
            }
        }
    }
    writeln!(out, "all {} items passed", ITEMS.len()).map_err(io)?;
    Ok(())
}
