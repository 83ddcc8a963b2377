//! `avf`: build AVF Runge-Kutta tableaux, check their energy-preservation
//! conditions and run them.
//!
//! Exit codes: 0 success, 2 input error, 3 expectation mismatch,
//! 4 insufficient precision, 5 solver failure.

mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
