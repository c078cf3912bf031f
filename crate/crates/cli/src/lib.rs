//! File formats, configuration and subcommands for the `peerfx` binary.
//! Library-level inference lives in `peerfx-core`.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod output;

use config::{Cli, Command};
pub use commands::Output;
pub use error::CliError;

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Enumerate { h, k } => commands::enumerate(*h, *k),
        Command::Assign(args) => commands::assign(args),
        Command::Probs(args) => commands::probs(args),
        Command::Estimate(args) => commands::estimate_cmd(args),
        Command::Test(args) => commands::test_cmd(args),
        Command::Optimize(args) => commands::optimize_cmd(args),
        Command::Fiducial(args) => commands::fiducial_cmd(args),
        Command::OracleCheck { suite, seed } => commands::oracle_check(suite, *seed),
    }
}
