//! File-based workflows around the adaptation lab: dataset generation,
//! training, and model diagnostics, all deterministic per seed.

pub mod cli;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod logging;
pub mod model_io;
pub mod pgm;

use clap::Parser;

use crate::cli::{Cli, Command};
use crate::error::Result;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(cmd) => commands::cmd_gen(cmd),
        Command::Train(args) => commands::cmd_train(args),
        Command::Analyze(cmd) => commands::cmd_analyze(cmd),
    }
}

pub fn parse_args() -> Cli {
    Cli::parse()
}
