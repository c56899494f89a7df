//! Command-line interface: synthetic oracles, training, evaluation,
//! rollouts, velocity-field export and synchronization simulation.

mod commands;
mod config;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for usage and configuration errors.
const EXIT_USAGE: u8 = 1;
/// Exit status for runtime divergence or non-finite aborts.
const EXIT_DIVERGED: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "osmp", version, about = "Orbitally stable motion primitives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic oracle dataset.
    OracleGen(commands::OracleGenArgs),
    /// Train a policy on a dataset.
    Train(commands::TrainArgs),
    /// Evaluate a policy against a dataset.
    Eval(commands::EvalArgs),
    /// Roll a policy out from an initial state.
    Rollout(commands::RolloutArgs),
    /// Export the velocity field on a grid.
    Field(commands::FieldArgs),
    /// Simulate a phase-synchronized group of policies.
    SyncSim(commands::SyncSimArgs),
}

/// Raised when a rollout or simulation diverged; maps to exit status 2.
#[derive(Debug)]
pub struct Diverged(pub String);

impl std::fmt::Display for Diverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "divergence: {}", self.0)
    }
}

impl std::error::Error for Diverged {}

/// Raised for invalid settings; maps to exit status 1.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Diverged>() {
            return EXIT_DIVERGED;
        }
        if let Some(e) = cause.downcast_ref::<osmp::Error>() {
            if matches!(e, osmp::Error::TrainingDiverged { .. } | osmp::Error::NonFinite(_)) {
                return EXIT_DIVERGED;
            }
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::OracleGen(a) => commands::oracle_gen(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Rollout(a) => commands::rollout(a),
        Command::Field(a) => commands::field(a),
        Command::SyncSim(a) => commands::sync_sim(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
