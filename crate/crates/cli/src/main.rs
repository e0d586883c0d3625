//! `eraser`: run the disentanglement-eraser simulations from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 no solution
//! (for example no phase matching).

mod commands;
mod config;
mod format;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "eraser",
    version,
    about = "Heralded disentanglement-eraser simulator"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Monte Carlo seed, overriding `montecarlo.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the main output here instead of stdout (overrides `output.path`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the collinear phase-matching angle.
    PhaseMatch(commands::PhaseMatchArgs),
    /// Coincidence probabilities over an analyzer-angle grid, as CSV.
    Sweep,
    /// Analytic CHSH value, plus a sampled estimate when `[montecarlo]` is set.
    Chsh,
    /// Reconstruct the A,B density matrix from tomography data, as CSV.
    Tomography,
    /// Emission directions and the pump-diameter condition.
    Geometry(commands::GeometryArgs),
    /// Sampled triple-coincidence counts at one analyzer setting, as CSV.
    Montecarlo,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    NoSolution(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NoSolution(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::NoSolution(m) => f.write_str(m),
        }
    }
}

impl From<eraser_core::Error> for CliError {
    fn from(e: eraser_core::Error) -> Self {
        use eraser_core::Error;
        match e {
            Error::NoPhaseMatching | Error::Unphysical { .. } => {
                CliError::NoSolution(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let common = cli.common;
    let result = match cli.command {
        Command::PhaseMatch(args) => commands::phase_match(&common, &args),
        Command::Sweep => commands::sweep(&common),
        Command::Chsh => commands::chsh(&common),
        Command::Tomography => commands::tomography(&common),
        Command::Geometry(args) => commands::geometry(&common, &args),
        Command::Montecarlo => commands::montecarlo(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eraser: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
