//! The `stratshap` command-line tool.
//!
//! Each subcommand lives in its own module and is callable as a library
//! function, so tests drive the same code paths as the binary.

pub mod args;
pub mod compare;
pub mod convergence;
pub mod error;
pub mod explain;
mod io;
pub mod oracle_check;
pub mod simulate;

use std::io::Write;

pub use args::Cli;
pub use error::CliError;

use args::Command;

/// Runs one parsed invocation, writing human-readable summaries to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Explain(a) => explain::run(a).map(drop),
        Command::OracleCheck(a) => oracle_check::run(&a, stdout).map(drop),
        Command::Simulate(a) => simulate::run(&a).map(drop),
        Command::Compare(a) => compare::run(&a, stdout).map(drop),
        Command::Convergence(a) => convergence::run(&a, stdout).map(drop),
    }
}
