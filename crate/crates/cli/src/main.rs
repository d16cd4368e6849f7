mod args;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Exit codes.
pub const EXIT_CONVERGED: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_MAX_ITER: u8 = 2;
pub const EXIT_BREAKDOWN: u8 = 3;
pub const EXIT_VERIFY_FAILED: u8 = 4;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_CONVERGED
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => run::solve(a),
        Command::Compare(a) => run::compare(a),
        Command::Verify(a) => run::verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
