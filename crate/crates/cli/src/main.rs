use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nijhydro_cli::commands::{run_hierarchy, run_selftest, run_solve, run_verify, Fault, RunOptions};
use nijhydro_cli::config::RunConfig;
use nijhydro_cli::error::{CliError, Result};

#[derive(Parser)]
#[command(name = "nijhydro", version, about = "Nijenhuis-operator symmetries and hydrodynamic-type solves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Probe-point seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Torsion, symmetry and conservation-law residuals against declared expectations.
    Verify(Common),
    /// Integrate the hydrodynamic-type system for the configured initial curve.
    Solve(Common),
    /// Build a conservation-law hierarchy and check its chain and closedness.
    Hierarchy(Common),
    /// Run the built-in corpus.
    Selftest {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Corrupt the corpus on purpose; the run must then fail.
        #[arg(long, value_enum)]
        inject_fault: Option<Fault>,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("NIJHYDRO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("NIJHYDRO_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let common = |c: &Common| -> Result<(RunConfig, RunOptions)> {
        Ok((
            RunConfig::load(&c.config)?,
            RunOptions {
                seed: c.seed,
                out: c.out.clone(),
                fault: None,
            },
        ))
    };
    let result = match &cli.command {
        Command::Verify(c) => common(c).and_then(|(cfg, o)| run_verify(&cfg, &o, &mut out)),
        Command::Solve(c) => common(c).and_then(|(cfg, o)| run_solve(&cfg, &o, &mut out)),
        Command::Hierarchy(c) => common(c).and_then(|(cfg, o)| run_hierarchy(&cfg, &o, &mut out)),
        Command::Selftest {
            config,
            seed,
            out: dir,
            inject_fault,
        } => {
            let cfg = config.as_deref().map(RunConfig::load).transpose()?;
            let o = RunOptions {
                seed: *seed,
                out: dir.clone(),
                fault: *inject_fault,
            };
            run_selftest(cfg.as_ref(), &o, &mut out)
        }
    };
    let _ = out.flush();
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
