//! `stlgru`: synthesize data, train, evaluate, check gradients, inspect costs
//! and run the ablation grid.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Flags, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "stlgru", version, about = "Graph-convolutional gated recurrent traffic forecaster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic series (STSF) and its ground-truth graph
    Synth(Flags),
    /// Fit a model; writes checkpoint.json and history.csv
    Train(Flags),
    /// Score a checkpoint on a dataset at the requested horizons
    Eval {
        #[command(flatten)]
        flags: Flags,
        /// Checkpoint written by `train`
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Segment to score
        #[arg(long, default_value = "test", value_parser = ["test", "validation"])]
        split: String,
    },
    /// Compare reverse-mode and finite-difference gradients on a toy model
    Gradcheck(Flags),
    /// Print parameter and FLOP counts with the resolved config
    Inspect(Flags),
    /// Train the four gumbel/attention combinations and tabulate MAE
    Ablate {
        #[command(flatten)]
        flags: Flags,
        /// Seeds per cell, counting up from --seed
        #[arg(long, default_value_t = 1)]
        repeats: u64,
    },
}

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or inputs that disagree with each other: exit 2.
    Usage(String),
    /// Anything that went wrong while doing the work: exit 1.
    Runtime(String),
}

impl From<stlgru::Error> for Failure {
    fn from(e: stlgru::Error) -> Self {
        use stlgru::Error as E;
        match e {
            E::Config { .. } | E::WindowLength { .. } | E::ParamsMismatch(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn resolve(flags: &Flags) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::resolve(flags)?;
    cfg.validate()?;
    eprintln!("config: {}", cfg.to_json());
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth(flags) => commands::synth(resolve(&flags)?),
        Command::Train(flags) => commands::train(resolve(&flags)?),
        Command::Eval {
            flags,
            checkpoint,
            split,
        } => commands::eval(resolve(&flags)?, &checkpoint, flags.horizon.is_some(), &split),
        Command::Gradcheck(flags) => commands::gradcheck(resolve(&flags)?),
        Command::Inspect(flags) => commands::inspect(resolve(&flags)?),
        Command::Ablate { flags, repeats } => commands::ablate(resolve(&flags)?, repeats),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
