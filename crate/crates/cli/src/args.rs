use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "filigeo", version, about = "Geodesics, extremal curves and causal structure for piecewise-smooth metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one geodesic (or a 1-d demonstration field) and export it.
    Integrate(IntegrateArgs),
    /// Run a scripted reproduction and write a pass/fail report.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    Hw,
    HwLorentzian,
    Bubble,
    FilippovDemos,
}

impl ExperimentName {
    pub fn id(self) -> &'static str {
        match self {
            Self::Hw => "hw",
            Self::HwLorentzian => "hw-lorentzian",
            Self::Bubble => "bubble",
            Self::FilippovDemos => "filippov-demos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Demo {
    Crossing,
    Sliding,
    Repulsive,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// hw, hw-lorentzian, bubble, lipschitz-toy, euclidean or minkowski.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 1e-10, allow_negative_numbers = true)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12, allow_negative_numbers = true)]
    pub atol: f64,
    #[arg(long, default_value_t = 1e-10, allow_negative_numbers = true)]
    pub event_tol: f64,
    /// Reachability grid spacing.
    #[arg(long, visible_alias = "h", allow_negative_numbers = true)]
    pub grid_h: Option<f64>,
    #[arg(long, default_value = "filigeo-out")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Format of the data exports; reports are always JSON.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Integrate a 1-d field `ẋ = a + b sgn(x)` instead of a geodesic.
    #[arg(long, value_enum, conflicts_with = "metric")]
    pub demo: Option<Demo>,
    /// Initial point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Initial velocity, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v0: Option<Vec<f64>>,
    /// End of the parameter interval.
    #[arg(long)]
    pub s_end: Option<f64>,
    /// Dimension of euclidean and minkowski.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub name: ExperimentName,
    #[command(flatten)]
    pub common: Common,
}
