//! `lla`: fit folded concave penalized models, run simulations, estimate
//! the oracle-event probabilities, and rebuild the comparison tables.
//!
//! Exit codes: 0 success, 1 input or config error, 2 numerical failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lla_core::simulation::Scale;

#[derive(Parser, Debug)]
#[command(name = "lla", version, about = "Folded concave penalized estimation by local linear approximation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// TOML config file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// `section.key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit one data set with the LLA algorithm.
    Fit(Common),
    /// Run a simulation experiment and summarize it.
    Simulate(Common),
    /// Estimate how often the oracle conditions fail.
    Diagnose(Common),
    /// Rebuild a comparison table from a preset.
    Reproduce {
        #[command(flatten)]
        common: Common,
        /// Preset name; overrides `reproduce.preset`.
        #[arg(long)]
        preset: Option<String>,
        /// desk or full; overrides `reproduce.scale`.
        #[arg(long)]
        scale: Option<Scale>,
    },
    /// Print the config key reference.
    Keys,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    numerical: bool,
    message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            numerical: false,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            numerical: true,
            message: message.into(),
        }
    }

    pub fn from_core(e: lla_core::Error) -> Self {
        Self {
            numerical: e.is_numerical(),
            message: e.to_string(),
        }
    }

    pub fn code(&self) -> u8 {
        if self.numerical {
            2
        } else {
            1
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code())
        }
    }
}
