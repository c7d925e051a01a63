use std::io::Write;

use nijhydro::calculus::{
    conservation_law_residual_eval, residual_scale, strong_symmetry_residual_eval, symmetry_residual_eval,
    torsion_eval,
};
use nijhydro::fields::{FormEval, OperatorEval, OperatorField};
use nijhydro::linalg::max_abs;
use nijhydro::Error;

use super::{fmt_point, probe_points, RunOptions};
use crate::config::{Check, Expectation, RunConfig, VerifyObjects};
use crate::error::{CliError, Result};

/// Residual of one check at one probe, with the scale its pass bound is relative to.
struct Sample {
    residual: f64,
    scale: f64,
    note: Option<&'static str>,
}

fn law_scale(l: &OperatorEval, f: &FormEval) -> f64 {
    (1.0 + max_abs(&l.value) + l.max_partial()) * (1.0 + f.form.amax() + max_abs(&f.jacobian))
}

fn operator_pair(l: &OperatorEval, m: &OperatorEval, strong: bool) -> Sample {
    let r = if strong {
        strong_symmetry_residual_eval(l, m)
    } else {
        symmetry_residual_eval(l, m)
    };
    match r {
        Ok(residual) => Sample {
            residual,
            scale: residual_scale(l, m),
            note: None,
        },
        Err(Error::DoesNotCommute { residual, .. }) => Sample {
            residual,
            scale: residual_scale(l, m),
            note: Some("does not commute with L"),
        },
        Err(e) => Sample {
            residual: f64::NAN,
            scale: 1.0,
            note: Some(if matches!(e, Error::NotGlRegular) { "L not gl-regular" } else { "evaluation failed" }),
        },
    }
}

fn sample(e: &Expectation, l: &dyn OperatorField, objs: &VerifyObjects, u: &[f64]) -> Result<Sample> {
    let eval_err = |what: &str| {
        let what = what.to_string();
        move |err: Error| CliError::Failed(format!("evaluating {what} at {}: {err}", fmt_point(u)))
    };
    let le = l.eval(u).map_err(eval_err("L"))?;
    let sym = |name: &Option<String>| -> Result<OperatorEval> {
        let name = name.as_deref().expect("validated");
        objs.symmetries[name].eval(u).map_err(eval_err(name))
    };
    let law = |name: &Option<String>| -> Result<FormEval> {
        let name = name.as_deref().expect("validated");
        Ok(objs.laws[name].eval(u).map_err(eval_err(name))?.into())
    };
    Ok(match e.check {
        Check::Torsion => Sample {
            residual: torsion_eval(&le).max_abs(),
            scale: residual_scale(&le, &le),
            note: None,
        },
        Check::Symmetry => operator_pair(&le, &sym(&e.symmetry)?, false),
        Check::StrongSymmetry => operator_pair(&le, &sym(&e.symmetry)?, true),
        Check::ConservationLaw => {
            let f = law(&e.law)?;
            Sample {
                residual: conservation_law_residual_eval(&le, &f),
                scale: law_scale(&le, &f),
                note: None,
            }
        }
        Check::SharedConservationLaw => {
            let (m, f) = (sym(&e.symmetry)?, law(&e.law)?);
            Sample {
                residual: conservation_law_residual_eval(&m, &f),
                scale: law_scale(&m, &f),
                note: None,
            }
        }
    })
}

fn describe(e: &Expectation) -> String {
    match e.check {
        Check::Torsion => "torsion".to_string(),
        Check::Symmetry => format!("symmetry {}", e.symmetry.as_deref().unwrap_or("?")),
        Check::StrongSymmetry => format!("strong symmetry {}", e.symmetry.as_deref().unwrap_or("?")),
        Check::ConservationLaw => format!("conservation law {}", e.law.as_deref().unwrap_or("?")),
        Check::SharedConservationLaw => format!(
            "law {} of symmetry {}",
            e.law.as_deref().unwrap_or("?"),
            e.symmetry.as_deref().unwrap_or("?")
        ),
    }
}

/// Evaluates the declared checks at the probe points. Exit 0 iff every expectation holds.
pub fn run_verify(config: &RunConfig, opts: &RunOptions, out: &mut dyn Write) -> Result<()> {
    let v = config
        .verify
        .as_ref()
        .ok_or_else(|| CliError::Config("`verify` section is required".into()))?;
    let op = config.operator()?;
    let objs = v.build(&op)?;
    let seed = opts.seed.unwrap_or(config.seed);
    let probes = probe_points(&objs.domain, &v.points, v.probes, seed);
    let (pass, fail) = (config.pass_tolerance(), config.fail_tolerance());
    let io = |e| CliError::Io {
        path: "stdout".into(),
        source: e,
    };

    writeln!(out, "verify {} — {} probes, seed {seed}", config.label(), probes.len()).map_err(io)?;
    writeln!(out, "pass: residual ≤ {pass:e}·scale; violation: residual > {fail:e}").map_err(io)?;

    let mut failures = Vec::new();
    for (k, e) in v.expect.iter().enumerate() {
        let title = describe(e);
        writeln!(out, "\n[{}] {title}", k + 1).map_err(io)?;
        writeln!(out, "  {:>5}  {:<40} {:>12}  {}", "probe", "point", "residual", "").map_err(io)?;
        let (mut worst, mut all_zero, mut any_violation) = (0.0f64, true, false);
        for (i, u) in probes.iter().enumerate() {
            let s = sample(e, op.field.as_ref(), &objs, u)?;
            let zero = s.residual <= pass * s.scale;
            let violated = s.residual > fail;
            all_zero &= zero && s.note.is_none();
            any_violation |= violated;
            worst = if s.residual.is_nan() { f64::NAN } else { worst.max(s.residual) };
            writeln!(
                out,
                "  {i:>5}  {:<40} {:>12.3e}  {}",
                fmt_point(u),
                s.residual,
                s.note.unwrap_or("")
            )
            .map_err(io)?;
        }
        let observed = if all_zero {
            "holds"
        } else if any_violation {
            "violated"
        } else {
            "inconclusive"
        };
        let ok = if e.holds { all_zero } else { any_violation };
        let expected = if e.holds { "holds" } else { "violated" };
        writeln!(
            out,
            "  max {worst:.3e}: expected {expected}, observed {observed} — {}",
            if ok { "OK" } else { "FAILED" }
        )
        .map_err(io)?;
        if !ok {
            failures.push(format!("{title} (expected {expected}, observed {observed}, max residual {worst:.3e})"));
        }
    }
    writeln!(out, "\n{} of {} expectations hold", v.expect.len() - failures.len(), v.expect.len()).map_err(io)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("expectations failed: {}", failures.join("; "))))
    }
}
