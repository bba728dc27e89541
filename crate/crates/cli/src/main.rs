use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = sprdyn::Cli::parse();
    match sprdyn::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => ExitCode::from(sprdyn::report_error(&e)),
    }
}
