use std::process::ExitCode;

use clap::Parser;
use colloc::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) if outcome.all_converged => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("colloc: solver did not converge");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("colloc: {e}");
            ExitCode::from(1)
        }
    }
}
