//! Command-line harness: resolves a run configuration, runs one command and
//! writes a manifest of everything it produced.

pub mod commands;
pub mod config;
pub mod manifest;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use config::{load_config, Mode};
use std::path::PathBuf;

pub use commands::{execute, Invocation};
pub use manifest::{Manifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "lobsim", version, about = "Limit order book simulation and execution-agent experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay order flow through the exchange only; writes logs and book dumps.
    Replay(RunArgs),
    /// Train the DDQL agent; writes checkpoints and the learning curve.
    Train(RunArgs),
    /// Compare a checkpoint against TWAP on paired runs.
    Evaluate(RunArgs),
    /// Fit order-flow stylized facts, optionally with and without the agent.
    Realism(RunArgs),
    /// Write synthetic LOBSTER message files.
    GenData(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration, or a previous run's manifest.json.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue training from the latest checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Learner checkpoint for evaluate and paired realism runs.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

impl Command {
    fn split(&self) -> (Mode, &RunArgs) {
        match self {
            Command::Replay(a) => (Mode::Replay, a),
            Command::Train(a) => (Mode::Train, a),
            Command::Evaluate(a) => (Mode::Evaluate, a),
            Command::Realism(a) => (Mode::Realism, a),
            Command::GenData(a) => (Mode::GenData, a),
        }
    }
}

/// Turn parsed arguments into a resolved invocation.
pub fn invocation(cli: &Cli) -> Result<Invocation> {
    let (mode, args) = cli.command.split();
    let loaded = load_config(&args.config)?;
    if let Some(m) = loaded.manifest_command {
        if m != mode {
            bail!("{} was written by `{m}`, not `{mode}`", args.config.display());
        }
    }
    let mut config = loaded.config;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if args.resume && mode != Mode::Train {
        bail!("--resume only applies to train");
    }
    Ok(Invocation { mode, config: config.resolve(), resume: args.resume, checkpoint: args.checkpoint.clone() })
}

pub fn run(cli: &Cli) -> Result<Manifest> {
    execute(&invocation(cli)?)
}
