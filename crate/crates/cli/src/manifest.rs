use std::path::Path;

use filigeo::metric::{bubble, euclidean, hw_lorentzian, hw_riemannian, lipschitz_toy, minkowski};
use filigeo::{Metric, MetricDescriptor};
use serde::{Deserialize, Serialize};

use crate::args::{Common, Format};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub lambda: Option<f64>,
    pub eps: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub event_tol: f64,
    pub grid_h: Option<f64>,
    pub seed: u64,
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub experiment: String,
    pub metric: Option<MetricDescriptor>,
    pub params: Params,
    pub out_dir: String,
    pub format: Format,
}

impl ExperimentManifest {
    pub fn new(experiment: &str, common: &Common, metric: Option<MetricDescriptor>) -> Result<Self, CliError> {
        let m = Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            metric,
            params: Params {
                lambda: common.lambda,
                eps: common.eps,
                rtol: common.rtol,
                atol: common.atol,
                event_tol: common.event_tol,
                grid_h: common.grid_h,
                seed: common.seed,
            },
            out_dir: common.out_dir.to_string_lossy().into_owned(),
            format: common.format,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        for (name, v) in [("rtol", p.rtol), ("atol", p.atol), ("event-tol", p.event_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Validation(format!("--{name} must be positive, got {v}")));
            }
        }
        if let Some(h) = p.grid_h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::Validation(format!("--grid-h must be positive, got {h}")));
            }
        }
        for (name, v) in [("lambda", p.lambda), ("eps", p.eps)] {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(CliError::Validation(format!("--{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        Path::new(&self.out_dir)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("manifest serializes")
    }
}

fn need(v: Option<f64>, flag: &str, metric: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Validation(format!("--metric {metric} needs --{flag}")))
}

/// Builds a zoo metric from command-line flags.
pub fn metric_from_flags(name: &str, lambda: Option<f64>, dim: usize) -> Result<Metric, CliError> {
    let bad = |e: filigeo::MetricError| CliError::Validation(e.to_string());
    match name {
        "hw" => hw_riemannian(need(lambda, "lambda", name)?).map_err(bad),
        "hw-lorentzian" => hw_lorentzian(need(lambda, "lambda", name)?).map_err(bad),
        "bubble" => bubble(need(lambda, "lambda", name)?).map_err(bad),
        "lipschitz-toy" => Ok(lipschitz_toy()),
        "euclidean" | "minkowski" if dim == 0 => Err(CliError::Validation("--dim must be positive".into())),
        "euclidean" => Ok(euclidean(dim)),
        "minkowski" if dim < 2 => Err(CliError::Validation("minkowski needs --dim ≥ 2".into())),
        "minkowski" => Ok(minkowski(dim)),
        other => Err(CliError::Validation(format!("unknown metric {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use clap::Parser;

    use super::*;
    use crate::args::{Cli, Command};

    fn common(args: &[&str]) -> Common {
        let mut full = vec!["filigeo", "experiment", "hw"];
        full.extend_from_slice(args);
        match Cli::parse_from(full).command {
            Command::Experiment(e) => e.common,
            Command::Integrate(_) => unreachable!(),
        }
    }

    #[test]
    fn round_trip() {
        let m = metric_from_flags("bubble", Some(0.5), 2).unwrap();
        let man = ExperimentManifest::new("bubble", &common(&["--h", "0.0078125"]), Some(m.descriptor().clone())).unwrap();
        let text = serde_json::to_string(&man).unwrap();
        let back: ExperimentManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, man);
        assert_eq!(back.params.grid_h, Some(0.0078125));
    }

    #[test]
    fn tolerances_must_be_positive() {
        for flag in ["--rtol", "--atol", "--event-tol"] {
            let r = ExperimentManifest::new("hw", &common(&[flag, "0"]), None);
            assert!(matches!(r, Err(CliError::Validation(_))), "{flag}");
        }
        assert!(ExperimentManifest::new("hw", &common(&["--grid-h", "-1"]), None).is_err());
    }

    #[test]
    fn metric_flags() {
        assert!(matches!(metric_from_flags("hw", None, 2), Err(CliError::Validation(_))));
        assert!(metric_from_flags("hw", Some(2.5), 2).is_err());
        assert!(metric_from_flags("nope", Some(1.5), 2).is_err());
        assert_eq!(metric_from_flags("minkowski", None, 3).unwrap().dim(), 3);
    }
}
