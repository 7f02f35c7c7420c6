//! `mmspeed` command-line front end: parses TOML cell files, runs the
//! selected methods and emits CSV.

pub mod cellfile;
pub mod commands;
pub mod config;
pub mod error;

pub use cellfile::{CellFile, LoadedCell};
pub use commands::{execute, Output};
pub use config::{Cli, Command, FRange, MethodName, RunConfig};
pub use error::{CliError, Result};

use std::io::Write;

/// Parses, runs and writes output. Returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match run_inner(cli) {
        Ok(out) => {
            for f in &out.failures {
                eprintln!("error: {f}");
            }
            if out.failed() {
                eprintln!("error: {}", CliError::Failed { failed: out.failures.len(), total: out.total });
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run_inner(cli: &Cli) -> Result<Output> {
    let cfg = RunConfig::from_command(&cli.command)?;
    let out = execute(&cfg)?;
    print!("{}", out.csv);
    std::io::stdout().flush().ok();
    if let Some(path) = &cfg.out {
        std::fs::write(path, &out.csv).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
    }
    Ok(out)
}
