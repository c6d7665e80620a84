use std::process::ExitCode;

use clap::Parser;
use mfgkit_cli::{execute, Cli, EXIT_INTERNAL};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match std::panic::catch_unwind(|| execute(cli)) {
        Ok(code) => code,
        Err(_) => EXIT_INTERNAL,
    };
    ExitCode::from(code)
}
