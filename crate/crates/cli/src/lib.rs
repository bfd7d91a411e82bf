//! Command-line runner for the Stochastic Newton Sampler.
//!
//! Three subcommands: `run` samples a configured target and writes the chain
//! artifacts, `simulate` draws a Poisson regression dataset, and `predict`
//! pushes a stored chain through a predictor.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "sns", version, about = "Stochastic Newton Sampler")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a chain from a TOML config and write its artifacts.
    Run(RunArgs),
    /// Simulate a regression dataset.
    Simulate(SimulateArgs),
    /// Predict from the samples of a previous run.
    Predict(PredictArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `sampler.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SimulateKind {
    Poisson,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub kind: SimulateKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Predictor {
    /// Mean response exp(X beta).
    PoissonMean,
    /// Posterior-predictive draw y ~ Poisson(exp(X beta)).
    PoissonDraw,
}

#[derive(Debug, clap::Args)]
pub struct PredictArgs {
    /// Directory written by `sns run`.
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long, value_enum)]
    pub predictor: Predictor,
    /// Headered CSV design matrix, one row per prediction.
    #[arg(long)]
    pub data: PathBuf,
    /// Defaults to the window stored with the chain.
    #[arg(long)]
    pub nburnin: Option<usize>,
    #[arg(long)]
    pub end: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Seed for stochastic predictors; defaults to the chain seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to the chain directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Predict(a) => commands::predict(&a),
    }
}
