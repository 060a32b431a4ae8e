use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = omvc::cli::Cli::parse();
    match omvc::cli::execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
