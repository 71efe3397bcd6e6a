use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use normgp_cli::config::parse_config;
use normgp_cli::run::{run, RunOptions, Subcommand};

/// Ground states, thresholds and dynamics of two-component
/// Gross-Pitaevskii systems with prescribed masses.
#[derive(Parser, Debug)]
#[command(name = "normgp", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed of the random perturbation (`evolve`).
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with status 0 even when a run did not converge.
    #[arg(long)]
    allow_partial: bool,
    /// Comma-separated `k` values of the unboundedness witness (`groundstate`).
    #[arg(long, value_delimiter = ',')]
    witness: Vec<f64>,
    /// `groundstate.json` written by `groundstate` (`evolve`).
    #[arg(long)]
    ground_state: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Command {
    Constants,
    Thresholds,
    Groundstate,
    Evolve,
    SweepBeta,
    Region,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(2);
        }
    };
    let sub = match cli.command {
        Command::Constants => Subcommand::Constants,
        Command::Thresholds => Subcommand::Thresholds,
        Command::Groundstate => Subcommand::GroundState,
        Command::Evolve => Subcommand::Evolve,
        Command::SweepBeta => Subcommand::SweepBeta,
        Command::Region => Subcommand::Region,
    };
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
        allow_partial: cli.allow_partial,
        witness: cli.witness,
        ground_state: cli.ground_state,
    };
    match run(sub, &cfg, &opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
