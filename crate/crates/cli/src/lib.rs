//! Command-line front end: `constants`, `expand`, `compare` and `verify`.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure,
//! 3 acceptance-threshold failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use clap::{Parser, Subcommand};

pub use config::{Overrides, RunConfig, Switch};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("threshold failure: {0}")]
    Threshold(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Threshold(_) => 3,
        }
    }
}

impl From<chfgap::Error> for CliError {
    fn from(e: chfgap::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "chfgap",
    version,
    about = "Gap asymptotics of the confluent hypergeometric kernel determinant"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// γ₀, Ω, τ, ζ, D_∞, D_{∞,1}, L̂_p and the flow classification.
    Constants,
    /// Term-by-term expansion over the s-grid (expand.csv).
    Expand,
    /// Nyström oracle against the expansion (compare.csv).
    Compare,
    /// Runs the invariant checks (verify.txt).
    Verify,
}

/// Runs one subcommand; the text it returns is printed on success.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = cli.overrides.resolve()?;
    output::write_file(&cfg.output_dir, "run.json", &output::to_json(&cfg)?)?;
    match cli.command {
        Command::Constants => commands::constants(&cfg),
        Command::Expand => commands::expand(&cfg),
        Command::Compare => commands::compare(&cfg),
        Command::Verify => verify::verify(&cfg),
    }
}
