use std::io::Write;

use nijhydro::fields::DomainBox;
use nijhydro::hierarchy::{is_regular_hierarchy, CHAIN_REL_TOL};
use nijhydro::linalg::max_abs;

use super::solve::{num, output_dir};
use super::{fmt_point, probe_points, RunOptions};
use crate::config::{HierarchyConfig, RunConfig};
use crate::error::{CliError, Result};

/// Closedness bound for the hierarchy forms.
const CLOSED_TOL: f64 = 1e-7;

fn base_point(config: &RunConfig, n: usize) -> Result<Vec<f64>> {
    if let Some(HierarchyConfig::Seed { base: Some(b), .. }) = &config.hierarchy {
        return Ok(b.clone());
    }
    if config.curve.is_some() {
        return config
            .curve(n)?
            .point(0.0)
            .map_err(|e| CliError::pipeline("initial curve", e));
    }
    if let Some(d) = config.verify.as_ref().and_then(|v| v.domain.as_ref()) {
        return Ok(d.lo.iter().zip(&d.hi).map(|(a, b)| 0.5 * (a + b)).collect());
    }
    Err(CliError::Config(
        "hierarchy needs a base point: give `curve`, `hierarchy.seed.base` or `verify.domain`".into(),
    ))
}

/// Builds the hierarchy, checks the chain `L*ωᵢ = ωᵢ₊₁` and closedness at probe points and
/// regularity at the base point, and writes `hierarchy.csv`.
pub fn run_hierarchy(config: &RunConfig, opts: &RunOptions, out: &mut dyn Write) -> Result<()> {
    let op = config.operator()?;
    let n = op.dim();
    let base = base_point(config, n)?;
    let h = config.hierarchy(&op, &base)?;
    let (domain, count, explicit) = match &config.verify {
        Some(v) => {
            let objs = v.build(&op)?;
            (objs.domain, v.probes, v.points.clone())
        }
        None => (DomainBox::around(&base, 0.1), 20, Vec::new()),
    };
    let seed = opts.seed.unwrap_or(config.seed);
    let probes = probe_points(&domain, &explicit, count, seed);
    let io = |e| CliError::Io {
        path: "stdout".into(),
        source: e,
    };

    let regular = is_regular_hierarchy(&h, &base).map_err(|e| CliError::pipeline("hierarchy", e))?;
    writeln!(out, "hierarchy {} — {} forms, base {}", config.label(), h.len(), fmt_point(&base)).map_err(io)?;
    writeln!(out, "regular at base: {}", if regular { "yes" } else { "no" }).map_err(io)?;
    writeln!(out, "  {:>5}  {:<40} {:>12} {:>12}", "probe", "point", "chain", "closedness").map_err(io)?;

    let dir = output_dir(config, opts)?;
    let path = dir.join("hierarchy.csv");
    let csv_err = |e: csv::Error| CliError::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    let potentials = h.potentials();
    let header: Vec<String> = (1..=n)
        .map(|i| format!("u{i}"))
        .chain(potentials.iter().flat_map(|p| (1..=p.len()).map(|i| format!("f{i}"))))
        .chain(["chain_residual".to_string(), "closedness_residual".to_string()])
        .collect();
    w.write_record(&header).map_err(csv_err)?;

    let (mut worst_chain, mut worst_closed) = (0.0f64, 0.0f64);
    let mut chain_ok = true;
    for (i, u) in probes.iter().enumerate() {
        let fail = |e| CliError::pipeline("hierarchy", e);
        let chain = h.chain_residual(op.field.as_ref(), u).map_err(fail)?;
        let closed = h.closedness_residual(u).map_err(fail)?;
        let scale = (1.0 + max_abs(&op.field.value(u).map_err(fail)?))
            * (1.0 + h.evals(u).map_err(fail)?.iter().map(|e| e.form.amax()).fold(0.0, f64::max));
        chain_ok &= chain <= CHAIN_REL_TOL * scale;
        worst_chain = worst_chain.max(chain);
        worst_closed = worst_closed.max(closed);
        writeln!(out, "  {i:>5}  {:<40} {chain:>12.3e} {closed:>12.3e}", fmt_point(u)).map_err(io)?;
        let mut row: Vec<String> = u.iter().copied().map(num).collect();
        if let Some(ps) = potentials {
            for p in ps {
                row.push(num(p.value(u).map_err(fail)?));
            }
        }
        row.push(num(chain));
        row.push(num(closed));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    writeln!(out, "max chain residual {worst_chain:.3e}, max closedness residual {worst_closed:.3e}").map_err(io)?;
    writeln!(out, "wrote {}", path.display()).map_err(io)?;

    let mut problems = Vec::new();
    if !regular {
        problems.push("differentials are dependent at the base point (regular hierarchy required)".to_string());
    }
    if !chain_ok {
        problems.push(format!("chain L*ωᵢ = ωᵢ₊₁ fails (max residual {worst_chain:.3e})"));
    }
    if worst_closed > CLOSED_TOL {
        problems.push(format!("forms are not closed (max residual {worst_closed:.3e})"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(problems.join("; ")))
    }
}
