use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match ceps::cli::run(ceps::cli::Cli::parse()) {
        Ok(out) => {
            if !out.is_empty() {
                // a closed pipe is not an error worth reporting
                let _ = writeln!(std::io::stdout(), "{out}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
