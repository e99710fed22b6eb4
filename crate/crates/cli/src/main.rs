//! `nsrl`: command-line harness for the Navier–Stokes laboratory.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Initial, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "nsrl",
    version,
    about = "Pseudo-spectral Navier-Stokes experiments on the periodic cube"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the flow; writes stats.csv and snapshots.
    Simulate(Args),
    /// Check the local pressure representation at the probe points.
    VerifyPressure(Args),
    /// Structure functions, increment moments and exponent fits.
    Structure(Args),
    /// Certificates and monitors along a trajectory.
    Criteria(Args),
    /// Merge the CSVs of an output directory into plot data.
    Report(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Configuration file (`section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quadrature doublings for verify-pressure, overriding `pressure.refine`.
    #[arg(long)]
    refine: Option<usize>,
    /// Seed of the initial condition, overriding `initial.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Args {
    fn load(&self) -> Result<RunConfig, CliError> {
        let text =
            std::fs::read_to_string(&self.config).map_err(|e| CliError::io(&self.config, e))?;
        let mut cfg = RunConfig::parse(&text)?;
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if let Some(k) = self.refine {
            cfg.pressure.refine = k;
        }
        if let Some(s) = self.seed {
            match &mut cfg.initial {
                Initial::Generator { seed, .. } => *seed = s,
                Initial::Snapshot(_) => {
                    return Err(CliError::Config(
                        "--seed has no effect on a snapshot start".into(),
                    ))
                }
            }
        }
        Ok(cfg)
    }
}

/// Sizes the global rayon pool from `NSRL_THREADS` (default: all cores).
fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NSRL_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!("NSRL_THREADS = `{v}` is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Simulate(a) => commands::simulate_cmd(&a.load()?),
        Command::VerifyPressure(a) => commands::verify_pressure_cmd(&a.load()?),
        Command::Structure(a) => commands::structure_cmd(&a.load()?),
        Command::Criteria(a) => commands::criteria_cmd(&a.load()?),
        Command::Report(a) => commands::report_cmd(&a.load()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
