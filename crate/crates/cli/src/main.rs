use std::process::ExitCode;

use clap::Parser;
use filigeo_cli::args::Cli;
use filigeo_cli::{run, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("filigeo: {e}");
            if matches!(e, CliError::Validation(_)) {
                eprintln!("\nRun `filigeo --help` for usage.");
            }
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
