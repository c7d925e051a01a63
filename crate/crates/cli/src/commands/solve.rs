use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nijhydro::hydro::{hydro_residual, HydroResidual, SolutionGrid};
use nijhydro::solver::{solve_grid, Pipeline};
use nijhydro::Error;

use super::RunOptions;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.display().to_string(),
        source: e.into(),
    }
}

/// Fixed-width scientific notation with 17 significant digits.
pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn output_dir(config: &RunConfig, opts: &RunOptions) -> Result<PathBuf> {
    let dir = opts
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn write_solution(path: &Path, grid: &SolutionGrid) -> Result<()> {
    let n = grid.dim();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = (1..n)
        .map(|i| format!("t{i}"))
        .chain(std::iter::once("x".to_string()))
        .chain((1..=n).map(|i| format!("u{i}")))
        .chain(std::iter::once("converged".to_string()))
        .collect();
    w.write_record(&header).map_err(csv_err(path))?;
    for flat in 0..grid.len() {
        let (t, x) = grid.coords(flat);
        let row: Vec<String> = t
            .iter()
            .copied()
            .chain(std::iter::once(x))
            .chain(grid.values[flat].iter().copied())
            .map(num)
            .chain(std::iter::once(u8::from(grid.converged[flat]).to_string()))
            .collect();
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_residuals(path: &Path, r: &HydroResidual) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["equation", "residual", "t_spacing", "x_spacing", "nodes"])
        .map_err(csv_err(path))?;
    let hx = r.spacing[r.spacing.len() - 1];
    for (i, v) in r.per_equation.iter().enumerate() {
        w.write_record([
            format!("t{}", i + 1),
            num(*v),
            num(r.spacing[i]),
            num(hx),
            r.nodes.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Builds the pipeline, solves on the configured grid and writes `solution.csv`,
/// `residuals.csv` and `report.txt`. Exit 1 if any node failed to converge.
pub fn run_solve(config: &RunConfig, opts: &RunOptions, out: &mut dyn Write) -> Result<()> {
    let op = config.operator()?;
    let spec = op.require_spec("solve")?.clone();
    let n = op.dim();
    let curve = config.curve(n)?;
    let (x_axis, t_axes) = config.grid_axes(n)?;
    let pc = config.pipeline_config();
    let base = curve.point(0.0).map_err(|e| CliError::pipeline("initial curve", e))?;
    let hierarchy = config.hierarchy(&op, &base)?;

    let pipeline = Pipeline::build(spec, curve, hierarchy, pc).map_err(|e| CliError::pipeline("pipeline", e))?;
    let start = Instant::now();
    let grid = solve_grid(&pipeline, &x_axis, &t_axes).map_err(|e| CliError::pipeline("grid solve", e))?;
    let solve_seconds = start.elapsed().as_secs_f64();
    let residual = match hydro_residual(&grid, pipeline.operator().as_ref()) {
        Ok(r) => Some(r),
        Err(Error::GridTooCoarse { .. }) => None,
        Err(e) => return Err(CliError::pipeline("hydro residual", e)),
    };

    let dir = output_dir(config, opts)?;
    write_solution(&dir.join("solution.csv"), &grid)?;
    if let Some(r) = &residual {
        write_residuals(&dir.join("residuals.csv"), r)?;
    }
    let rep = pipeline.report();
    let failed = grid.converged.iter().filter(|c| !**c).count();
    let report_path = dir.join("report.txt");
    {
        let f = File::create(&report_path).map_err(io_err(&report_path))?;
        let mut w = BufWriter::new(f);
        let mut lines = vec![
            format!("run: {}", config.label()),
            format!("operator blocks: {:?}", pipeline.spec().blocks),
            String::new(),
            "tolerances".into(),
            format!("  newton: {:e} (max {} iterations)", pc.newton.tol, pc.newton.max_iterations),
            format!("  quadrature per leg: {:e}", pc.quad_tol),
            format!("  extension M(γ)γ′ = ξ: {:e}", pc.extension_tol),
            format!("  on-curve normalisation: {:e}", pc.on_curve_tol),
            format!("  sample consistency: {:e}", pc.extraction.consistency_tol),
            String::new(),
            "construction".into(),
            format!("  curve samples: {}", rep.samples),
            format!("  max condition number of the hierarchy matrix on γ: {:.3e}", rep.max_xi_condition),
            format!("  max Krylov solve residual: {:.3e}", rep.max_krylov_residual),
            format!("  extension residual: {:.3e}", rep.extension_residual),
            format!("  on-curve value residual: {:.3e}", rep.on_curve.value_residual),
            format!("  on-curve derivative residual: {:.3e}", rep.on_curve.derivative_residual),
            String::new(),
            "grid".into(),
            format!("  nodes: {} (shape {:?}, t axes then x)", grid.len(), grid.shape()),
            format!("  converged: {}/{}", grid.len() - failed, grid.len()),
            format!(
                "  max Newton residual: {:.3e}",
                grid.newton_residuals.iter().copied().fold(0.0, f64::max)
            ),
        ];
        match &residual {
            Some(r) => {
                for (i, v) in r.per_equation.iter().enumerate() {
                    lines.push(format!("  hydro residual t{}: {:.3e}", i + 1, v));
                }
            }
            None => lines.push("  hydro residual: grid too coarse (need 3 nodes per axis)".into()),
        }
        lines.extend([
            String::new(),
            "timings".into(),
            format!("  build: {:.3} s", rep.build_seconds),
            format!("  grid solve: {solve_seconds:.3} s"),
        ]);
        for l in lines {
            writeln!(w, "{l}").map_err(io_err(&report_path))?;
        }
        w.flush().map_err(io_err(&report_path))?;
    }

    let stdout = |e| CliError::Io {
        path: "stdout".into(),
        source: e,
    };
    writeln!(out, "solve {}: {} nodes, {} converged", config.label(), grid.len(), grid.len() - failed).map_err(stdout)?;
    if let Some(r) = &residual {
        writeln!(out, "max hydro residual {:.3e}", r.max()).map_err(stdout)?;
    }
    writeln!(out, "wrote {}", dir.display()).map_err(stdout)?;
    if failed > 0 {
        return Err(CliError::Failed(format!(
            "{failed} of {} nodes did not converge — the target lies outside the region where the implicit system is solvable",
            grid.len()
        )));
    }
    Ok(())
}
