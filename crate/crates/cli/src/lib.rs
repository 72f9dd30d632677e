//! Command-line front end: JSON configs in, CSV and JSON files out.
//!
//! Exit codes are 0 on success, 1 on usage or solver errors and 2 when a
//! hard monitor (positivity or the temperature bounds) is violated.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use args::{Cli, Command};
pub use config::{RunConfig, RunManifest};
pub use error::{CliError, EXIT_FAILURE, EXIT_MONITOR, EXIT_OK};

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a, cli.quiet),
        Command::Sweep(a) => commands::sweep(a, cli.quiet),
        Command::Mms(a) => commands::mms(a, cli.quiet),
        Command::Scale(a) => commands::scale(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("etdiode: {e}");
        e.exit_code()
    })
}
