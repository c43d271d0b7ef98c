//! `kappa-qkd`: command-line front end for the simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 physics or commitment
//! error, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod output;

#[derive(Debug, Parser)]
#[command(
    name = "kappa-qkd",
    version,
    about = "Sign-randomized Stern-Gerlach key distribution simulator"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `session.seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output file instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Per-round CSV (protocol only).
    #[arg(long, global = true, value_name = "PATH")]
    pub rounds_csv: Option<PathBuf>,
    /// No progress or summary lines on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Worker threads, 0 for all cores. Output does not depend on it.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Time series of a single hidden trajectory pair as CSV.
    Trajectory(commands::TrajectoryArgs),
    /// Outcome statistics over equilibrium samples at a fixed κ, as JSON.
    Ensemble(commands::EnsembleArgs),
    /// Full protocol session, JSON report.
    Protocol,
    /// Eavesdropper accuracy and Bob-bit invariance per |κ|, as CSV.
    Sweep(commands::SweepArgs),
    /// Single-particle scheme with random bases, JSON report.
    Bb84Demo,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Physics(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Physics(m) => write!(f, "physics error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<kappa_qkd::Error> for CliError {
    fn from(e: kappa_qkd::Error) -> Self {
        if e.is_physics() {
            CliError::Physics(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Trajectory(args) => commands::trajectory(&cli.global, &args),
        Command::Ensemble(args) => commands::ensemble(&cli.global, &args),
        Command::Protocol => commands::protocol(&cli.global),
        Command::Sweep(args) => commands::sweep(&cli.global, &args),
        Command::Bb84Demo => commands::bb84_demo(&cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kappa-qkd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
