//! Experiment runner: JSON configuration, named initial data, the canonical
//! experiment suites and their CSV/JSON/SVG artifacts.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod profiles;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{ConfigError, Experiment, ExperimentConfig};

/// Build version: package version plus `git describe` output when the
/// sources were a git checkout.
pub const VERSION: &str = env!("BO3_BUILD_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Comparison {
    AtMost { bound: f64 },
    AtLeast { bound: f64 },
    Within { target: f64, tolerance: f64 },
    /// The quantity is exactly what it should be (e.g. errors at round-off).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    /// Non-finite values are written as `null`.
    #[serde(deserialize_with = "nullable_f64")]
    pub measured: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Verdict {
    pub fn new(name: &str, measured: f64, comparison: Comparison) -> Self {
        let pass = match comparison {
            Comparison::AtMost { bound } => measured <= bound,
            Comparison::AtLeast { bound } => measured >= bound,
            Comparison::Within { target, tolerance } => (measured - target).abs() <= tolerance,
            Comparison::Exact => true,
        };
        Verdict {
            name: name.to_string(),
            measured,
            comparison,
            pass,
        }
    }

    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Verdict::new(name, measured, Comparison::AtMost { bound })
    }

    pub fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Verdict::new(name, measured, Comparison::AtLeast { bound })
    }

    pub fn within(name: &str, measured: f64, target: f64, tolerance: f64) -> Self {
        Verdict::new(name, measured, Comparison::Within { target, tolerance })
    }
}

fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Degraded,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Degraded => 2,
        }
    }
}

/// Exit code for usage and configuration errors.
pub const EXIT_USAGE: i32 = 3;

/// What an experiment produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
    pub error: Option<String>,
}

impl Outcome {
    /// Fail on an error or any failed verdict, degraded on warnings.
    pub fn status(&self) -> Status {
        if self.error.is_some() || self.verdicts.iter().any(|v| !v.pass) {
            Status::Fail
        } else if !self.warnings.is_empty() {
            Status::Degraded
        } else {
            Status::Pass
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub status: Status,
    #[serde(flatten)]
    pub outcome: Outcome,
}

/// Validates, runs and writes `manifest.json`. Configuration errors are
/// returned before anything is written.
pub fn run(config: &ExperimentConfig) -> Result<(PathBuf, Manifest), ConfigError> {
    config.validate()?;
    let dir = config.output_dir();
    std::fs::create_dir_all(&dir).map_err(|source| ConfigError::Write {
        path: dir.clone(),
        source,
    })?;
    let outcome = experiments::execute(config, &dir);
    let manifest = Manifest {
        config: config.clone(),
        version: VERSION.to_string(),
        status: outcome.status(),
        outcome,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), text + "\n").map_err(|source| ConfigError::Write {
        path: dir.clone(),
        source,
    })?;
    Ok((dir, manifest))
}

pub fn read_manifest(path: &Path) -> Result<Manifest, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
