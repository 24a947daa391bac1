//! The `filigeo` command line: argument parsing, manifests, reports and
//! the scripted experiments.

pub mod args;
pub mod experiments;
pub mod integrate;
pub mod manifest;
pub mod report;

use thiserror::Error;

use crate::args::{Cli, Command};
use crate::manifest::ExperimentManifest;

pub const EXIT_FAILED_CHECKS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_USAGE,
            Self::Io(..) | Self::Run(_) => EXIT_FAILED_CHECKS,
        }
    }
}

/// `FILIGEO_THREADS` caps the rayon pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("FILIGEO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("FILIGEO_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Run(e.to_string()))
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Integrate(args) => {
            let (report, code) = integrate::run(&args)?;
            println!("{}", report.manifest.out_dir().join("report.json").display());
            Ok(code)
        }
        Command::Experiment(args) => {
            let metric = experiments::metric_for(args.name, args.common.lambda)?;
            let man = ExperimentManifest::new(args.name.id(), &args.common, Some(metric.descriptor().clone()))?;
            let report = experiments::run(args.name, man)?;
            for c in &report.checks {
                println!("{} {}", c.id, if c.pass { "pass" } else { "FAIL" });
            }
            Ok(if report.passed { 0 } else { EXIT_FAILED_CHECKS })
        }
    }
}
