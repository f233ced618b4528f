use std::process::ExitCode;

use clap::Parser;
use rpfv_cli::{exit_code, run, Cli, Outcome, EXIT_VERIFY_FAILED};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(EXIT_VERIFY_FAILED as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
