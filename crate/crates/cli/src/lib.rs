//! Library behind the `suprema` binary: scenario parsing, the five commands
//! and their file outputs.

pub mod commands;
pub mod output;
pub mod scenario;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use scenario::Scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    /// 1 config, 2 numerical or simulation failure, 3 failed checks.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) => 2,
            Self::ChecksFailed(_) => 3,
        }
    }
}

impl From<suprema::Error> for CliError {
    fn from(e: suprema::Error) -> Self {
        match e {
            suprema::Error::Config(_) | suprema::Error::InvalidInput(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Numerical(format!("i/o: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "suprema", version, about = "Suprema of killed risk processes: analytic laws and Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Target {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    /// Output directory; defaults to the scenario's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario and report the net-profit status.
    Validate(Target),
    /// phi(q), b, p_tau, the overshoot law and the PK distribution.
    Analytic(Target),
    /// Simulate paths and write samples and empirical laws.
    Simulate(Target),
    /// Simulate, evaluate the analytic laws and run every check.
    Compare(Target),
    /// Descending ladder exponent and its large-beta limit.
    LadderDiag(Target),
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate(t) => commands::validate(t),
        Command::Analytic(t) => commands::analytic(t),
        Command::Simulate(t) => commands::simulate(t),
        Command::Compare(t) => commands::compare(t),
        Command::LadderDiag(t) => commands::ladder_diag(t),
    }
}
