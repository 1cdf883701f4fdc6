//! `sprt-info`: Monte Carlo tables, exact oracle tables, identity
//! verification and the ρ-sweep for Wald's sequential test.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid configuration or
//! input, 3 I/O failure, 4 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "sprt-info", version, about = "Information flow of Wald's sequential probability ratio test")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the Monte Carlo ensemble and write its state table.
    Simulate(Overrides),
    /// Propagate the exact density oracle and write its state table.
    Oracle(Overrides),
    /// Check the information identities on tables, generating them if none are given.
    Verify {
        #[command(flatten)]
        overrides: Overrides,
        /// Table files (.csv or .json) to verify.
        inputs: Vec<PathBuf>,
    },
    /// Run the oracle across ρ values and check that every residual decays.
    Sweep(Overrides),
}

/// Flags override values from the configuration file.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// TOML (or JSON) experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Error probability α, setting the thresholds ±ln((1−α)/α).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Signal-to-noise ratio ρ.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Trajectories per hypothesis.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed of the random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Horizon in steps.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Noise model: gaussian or laplace.
    #[arg(long)]
    pub noise: Option<String>,
    /// Oracle grid points.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table format: csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Fractional digits of printed numbers.
    #[arg(long)]
    pub precision: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(o) => config::resolve(&o).and_then(|c| commands::simulate(&c)),
        Command::Oracle(o) => config::resolve(&o).and_then(|c| commands::oracle(&c)),
        Command::Verify { overrides, inputs } => config::resolve(&overrides).and_then(|c| commands::verify(&c, &inputs)),
        Command::Sweep(o) => config::resolve(&o).and_then(|c| commands::sweep(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
