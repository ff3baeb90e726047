//! `adabs`: command-line front end for the adaptive-absorption simulator.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! self-check failure (outputs are still written).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("tolerance failure: {0}")]
    Tolerance(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<adaptive_absorption::Error> for CliError {
    fn from(e: adaptive_absorption::Error) -> Self {
        match e {
            adaptive_absorption::Error::QuadratureNonConvergence { .. } => {
                CliError::Tolerance(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Tolerance(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "adabs", version, about = "Adaptive absorption simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the seed in the configuration
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Unconditional state over a time grid
    Evolve(Common),
    /// Monte Carlo ensemble of first-detection trajectories
    Trajectories(Common),
    /// P-representation of an absorbed coherent state
    Pfunction(Common),
    /// Photon-number posterior given the detection time
    Posterior(Common),
    /// Beam-splitter cascade with feedback
    Cascade(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, common): (fn(&commands::RunArgs) -> Result<(), CliError>, &Common) = match &cli.command {
        Command::Evolve(c) => (commands::evolve, c),
        Command::Trajectories(c) => (commands::trajectories, c),
        Command::Pfunction(c) => (commands::pfunction, c),
        Command::Posterior(c) => (commands::posterior, c),
        Command::Cascade(c) => (commands::cascade, c),
    };
    let args = commands::RunArgs {
        config: &common.config,
        seed: common.seed,
        out: &common.out,
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adabs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
