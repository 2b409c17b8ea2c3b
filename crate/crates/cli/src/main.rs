//! `otinfer`: simulate noisy transport observations, infer latent marginals
//! and cost parameters by MCMC, and turn finished chains into plot-ready
//! tables.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 usage error,
//! 2 data error (unreadable or inconsistent files), 3 numerical failure.

use clap::Parser;

mod args;
mod commands;
mod config_file;
mod error;
mod manifest;

use args::{Cli, Command};
use error::CliError;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests go to stdout and exit 0; real parse
            // failures are usage errors.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Infer(args) => commands::infer::run(args),
        Command::Diagnose(args) => commands::diagnose::run(args),
        Command::Ingest(args) => commands::ingest::run(args),
    }
}
