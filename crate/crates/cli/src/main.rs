use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dephasing_cli::{load_config, run, Mode, RunOptions};
use dephasing_core::Execution;

/// Photonic dephasing: decay rates, trajectories, B+ decompositions and invariant checks.
#[derive(Parser)]
#[command(name = "dephasing", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized states and checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance profile: default, strict or loose.
    #[arg(long, global = true)]
    tolerance_profile: Option<String>,
    /// Run on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Decay-rate curves, analytic and extracted.
    Rates,
    /// Master-equation trajectory.
    Evolve,
    /// Decoherence functions of the B+ decomposition.
    Bplus,
    /// Structural invariant suite.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = match cli.command {
        Command::Rates => Mode::Rates,
        Command::Evolve => Mode::Evolve,
        Command::Bplus => Mode::Bplus,
        Command::Verify => Mode::Verify,
    };
    let opts = RunOptions {
        out: cli.out,
        seed: cli.seed,
        tolerance_profile: cli.tolerance_profile,
        exec: if cli.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    let result = load_config(cli.config.as_deref(), mode).and_then(|cfg| run(mode, &cfg, &opts));
    match result {
        Ok(outcome) => {
            for f in outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dephasing: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
