use std::process::ExitCode;

use clap::Parser;
use twinmarket_cli::{run, Cli};

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => ExitCode::from(run(&cli)),
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            ExitCode::from(code)
        }
    }
}
