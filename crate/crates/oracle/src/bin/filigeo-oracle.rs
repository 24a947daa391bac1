use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use filigeo_oracle::{generate, Settings};

/// Regenerate the golden fixtures file.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Output path; `-` writes to stdout.
    #[arg(long, default_value = "fixtures/golden.json")]
    out: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Compare with the existing file instead of writing it.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut settings = Settings::default();
    if let Some(tol) = args.tol {
        settings.tol = tol;
    }
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }
    let text = match generate(&settings) {
        Ok(g) => g.to_json(),
        Err(e) => {
            eprintln!("filigeo-oracle: {e}");
            return ExitCode::FAILURE;
        }
    };
    if args.check {
        return match std::fs::read_to_string(&args.out) {
            Ok(old) if old == text => ExitCode::SUCCESS,
            Ok(_) => {
                eprintln!("filigeo-oracle: {} differs from a fresh run", args.out.display());
                ExitCode::FAILURE
            }
            Err(e) => {
                eprintln!("filigeo-oracle: {}: {e}", args.out.display());
                ExitCode::FAILURE
            }
        };
    }
    if args.out.as_os_str() == "-" {
        print!("{text}");
        return ExitCode::SUCCESS;
    }
    if let Err(e) = std::fs::write(&args.out, text) {
        eprintln!("filigeo-oracle: {}: {e}", args.out.display());
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
