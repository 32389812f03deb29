use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use spectral_relax_cli::config::Cli;
use spectral_relax_cli::error::CliError;

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.line());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            return fail(&CliError::Config(first.to_string()));
        }
    };
    match spectral_relax_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
