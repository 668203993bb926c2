//! Command-line layer over `twinmarket`: configuration, CSV input and
//! JSON/CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{execute, Command, Outcome};
pub use config::{resolve, Format, RunConfig, RunFlags};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "twinmarket",
    version,
    about = "Complete twins of observed price series"
)]
pub struct Cli {
    /// TOML file with run settings; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub flags: RunFlags,
    #[command(subcommand)]
    pub command: Command,
}

/// Runs a parsed command line, writing the report and warnings.
/// Returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let outcome =
        resolve(&cli.flags, cli.config.as_deref()).and_then(|cfg| execute(&cli.command, &cfg));
    let outcome = match outcome {
        Ok(outcome) => outcome,
        Err(err) => {
            eprintln!("error: {err}");
            return err.exit_code();
        }
    };
    for warning in &outcome.warnings {
        eprintln!("warning: {warning}");
    }
    let written = match &cli.output {
        Some(path) => std::fs::write(path, &outcome.body)
            .map_err(|e| CliError::io(path.display().to_string(), e)),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(outcome.body.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    };
    if let Err(err) = written.map(|_| ()).and(outcome.failure.map_or(Ok(()), Err)) {
        eprintln!("error: {err}");
        return err.exit_code();
    }
    0
}
