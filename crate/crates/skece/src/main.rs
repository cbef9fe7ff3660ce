use std::process::ExitCode;

use clap::Parser;
use skece::cli::{self, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", cli::error_record("usage", &anyhow::Error::from(e)));
            return ExitCode::from(2);
        }
    };
    match cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", cli::error_record("runtime", &e));
            ExitCode::FAILURE
        }
    }
}
