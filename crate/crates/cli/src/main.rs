//! Command-line front end for the backpressure routing simulator.
//!
//! Exit codes: 2 for configuration and usage problems, 1 for failures
//! during a run (I/O, simulation invariant breaches), 0 on success.

mod commands;
mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<bpsim_core::Error> for CliError {
    fn from(e: bpsim_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "bpsim",
    version,
    about = "Backpressure routing simulator for wireless multi-hop networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct CommandArgs {
    /// Flat JSON config file; flags of the same name override its keys
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the duty-cycle predictor and write a checkpoint
    Train(CommandArgs),
    /// Run a sizes x policies grid and write episode and summary tables
    Benchmark(CommandArgs),
    /// Simulate one episode and report its metrics
    Episode(CommandArgs),
    /// Write the bias table and per-link distances for one instance
    InspectBias(CommandArgs),
}

fn resolve(args: CommandArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("config {}: {e}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    cfg.apply(args.overrides);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Train(args) => commands::cmd_train(&resolve(args)?),
        Cmd::Benchmark(args) => commands::cmd_benchmark(&resolve(args)?),
        Cmd::Episode(args) => commands::cmd_episode(&resolve(args)?),
        Cmd::InspectBias(args) => commands::cmd_inspect_bias(&resolve(args)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
