mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::CliError;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Recover(a) => commands::recover(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Image(a) => commands::image(&a),
        Command::OracleCheck(a) => commands::oracle_check(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Harness(ref h) if commands::is_usage(h) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
