//! Experiment configuration: one JSON document, optionally patched by
//! `path=value` overrides of scalar fields.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::profiles::Profile;
use crate::spectral::lp::check_resolved;
use crate::spectral::SpectralGrid;
use crate::stepper::SolverConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad override `{0}`: expected path=value")]
    OverrideSyntax(String),
    #[error("override path `{0}` does not name a scalar field")]
    OverridePath(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Conserve,
    Scaling,
    AiryDecay,
    Strichartz,
    NormalformScaling,
    LinearizedL2,
    LnlConservation,
    DecayProfile,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Conserve => "conserve",
            Experiment::Scaling => "scaling",
            Experiment::AiryDecay => "airy_decay",
            Experiment::Strichartz => "strichartz",
            Experiment::NormalformScaling => "normalform_scaling",
            Experiment::LinearizedL2 => "linearized_l2",
            Experiment::LnlConservation => "lnl_conservation",
            Experiment::DecayProfile => "decay_profile",
        }
    }

    /// Experiments that evolve the data with a mean-zero flow.
    fn needs_zero_mean(self) -> bool {
        !matches!(self, Experiment::AiryDecay | Experiment::Strichartz)
    }
}

/// Grid size and period; exactly one of `length` and `length_over_pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(default)]
    pub length: Option<f64>,
    #[serde(default)]
    pub length_over_pi: Option<f64>,
}

impl GridSpec {
    pub fn length(&self) -> Result<f64> {
        match (self.length, self.length_over_pi) {
            (Some(l), None) => Ok(l),
            (None, Some(m)) => Ok(m * std::f64::consts::PI),
            _ => invalid("grid needs exactly one of `length` and `length_over_pi`"),
        }
    }

    pub fn build(&self) -> Result<Arc<SpectralGrid>> {
        SpectralGrid::new(self.n, self.length()?).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Analysis {
    pub delta: f64,
    pub c_region: f64,
    /// Bands of the normal-form sweep.
    pub bands: Vec<u32>,
    /// Amplitude ladder of the normal-form and almost-conservation sweeps.
    pub amplitudes: Vec<f64>,
    /// Sample times of the linear decay fit; 25 log-spaced times in [1, 100]
    /// when absent.
    pub times: Option<Vec<f64>>,
    /// Start of the window over which bounds `≤ Kε` are measured.
    pub t_start: f64,
    /// Time-step ladder for the self-convergence check; empty skips it.
    pub convergence_dts: Vec<f64>,
    pub scaling_lambda: f64,
    pub t_probe: f64,
    pub probe_delta: f64,
    pub strichartz_j: u32,
    pub strichartz_k: Vec<u32>,
    /// Width of the high-frequency Strichartz datum.
    pub strichartz_narrow_width: f64,
    pub strichartz_window: f64,
    /// Largest acceptable constant in bounds of the form `≤ Kε`.
    pub k_max: f64,
    /// Randomized trials of the instantaneous checks.
    pub trials: usize,
}

impl Default for Analysis {
    fn default() -> Self {
        Analysis {
            delta: 0.05,
            c_region: 1.0,
            bands: vec![1, 2, 3],
            amplitudes: vec![0.01, 0.02, 0.04, 0.08],
            times: None,
            t_start: 1.0,
            convergence_dts: Vec::new(),
            scaling_lambda: 2.0,
            t_probe: 0.05,
            probe_delta: 1e-3,
            strichartz_j: 0,
            strichartz_k: vec![3, 4, 5, 6, 7, 8],
            strichartz_narrow_width: 1.0 / 128.0,
            strichartz_window: 1.0,
            k_max: 10.0,
            trials: 20,
        }
    }
}

impl Analysis {
    pub fn decay_times(&self) -> Vec<f64> {
        self.times.clone().unwrap_or_else(|| {
            (0..25).map(|i| 10f64.powf(2.0 * i as f64 / 24.0)).collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub grid: GridSpec,
    pub data: Profile,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn is_geometric(xs: &[f64]) -> bool {
    if xs.len() < 2 || xs.iter().any(|x| !(*x > 0.0)) {
        return false;
    }
    let r = xs[1] / xs[0];
    r != 1.0 && xs.windows(2).all(|w| ((w[1] / w[0]) / r - 1.0).abs() < 1e-6)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a config file and applies `path=value` overrides.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut value: Value = serde_json::from_str(&text)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Ok(serde_json::from_value(value)?)
    }

    /// Output directory: `$BO3_OUT`, else `output`, else `out/<experiment>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os("BO3_OUT") {
            return PathBuf::from(dir);
        }
        self.output
            .clone()
            .unwrap_or_else(|| Path::new("out").join(self.experiment.name()))
    }

    /// Checks every precondition that can be checked without evolving data.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.data.validate().map_err(ConfigError::Invalid)?;
        self.solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let a = &self.analysis;
        if !(a.k_max > 0.0) {
            return invalid("analysis.k_max must be positive");
        }
        if self.experiment.needs_zero_mean() && !self.data.build(&grid).has_zero_mean() {
            return invalid(format!(
                "experiment {} evolves a mean-zero flow but profile {:?} has nonzero mean",
                self.experiment.name(),
                self.data.name
            ));
        }
        match self.experiment {
            Experiment::Conserve => {
                let d = &a.convergence_dts;
                if !d.is_empty() && (d.len() < 3 || !is_geometric(d)) {
                    return invalid("analysis.convergence_dts needs at least 3 values in geometric progression");
                }
            }
            Experiment::Scaling => {
                if !(a.scaling_lambda > 0.0) || a.scaling_lambda == 1.0 {
                    return invalid("analysis.scaling_lambda must be positive and not 1");
                }
            }
            Experiment::AiryDecay => {
                let t = a.decay_times();
                if t.len() < 2 || t.iter().any(|t| !(*t > 0.0)) {
                    return invalid("analysis.times needs at least 2 positive times");
                }
            }
            Experiment::Strichartz => {
                if a.strichartz_k.is_empty() {
                    return invalid("analysis.strichartz_k is empty");
                }
                for &k in a.strichartz_k.iter().chain([&a.strichartz_j]) {
                    check_resolved(&grid, k).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                }
                if a.strichartz_k.iter().any(|k| k.abs_diff(a.strichartz_j) <= 2) {
                    return invalid("strichartz bands must differ from strichartz_j by more than 2");
                }
                if !(a.strichartz_narrow_width > 0.0 && a.strichartz_window > 0.0) {
                    return invalid("strichartz widths and window must be positive");
                }
            }
            Experiment::NormalformScaling => {
                if a.amplitudes.len() < 4 || !is_geometric(&a.amplitudes) {
                    return invalid("analysis.amplitudes needs at least 4 values in increasing geometric progression");
                }
                if a.amplitudes[1] < a.amplitudes[0] {
                    return invalid("analysis.amplitudes must increase");
                }
                if a.bands.is_empty() || a.bands.contains(&0) {
                    return invalid("analysis.bands must be nonempty and at least 1");
                }
                for &k in &a.bands {
                    check_resolved(&grid, k).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                }
                if !(a.probe_delta > 0.0 && a.t_probe >= a.probe_delta) {
                    return invalid("need probe_delta > 0 and t_probe >= probe_delta");
                }
            }
            Experiment::LinearizedL2 => {
                if a.amplitudes.len() < 2 || !is_geometric(&a.amplitudes) {
                    return invalid("analysis.amplitudes needs at least 2 values in geometric progression");
                }
            }
            Experiment::LnlConservation | Experiment::DecayProfile => {
                if !(a.t_start > 0.0 && a.t_start < self.solver.t_end) {
                    return invalid("analysis.t_start must lie in (0, solver.t_end)");
                }
                if !(a.delta > 0.0 && a.delta < 0.25 && a.c_region > 0.0) {
                    return invalid("need 0 < delta < 1/4 and c_region > 0");
                }
            }
        }
        Ok(())
    }
}

/// Sets the scalar at a dotted path. The value is parsed as JSON when
/// possible and kept as a string otherwise.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::OverrideSyntax(spec.to_string()))?;
    if path.is_empty() {
        return Err(ConfigError::OverrideSyntax(spec.to_string()));
    }
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    if new.is_object() || new.is_array() {
        return Err(ConfigError::OverridePath(path.to_string()));
    }
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().expect("split yields at least one key");
    let mut node = doc;
    for key in keys {
        let map = node
            .as_object_mut()
            .ok_or_else(|| ConfigError::OverridePath(path.to_string()))?;
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| ConfigError::OverridePath(path.to_string()))?;
    if matches!(map.get(last), Some(v) if v.is_object() || v.is_array()) {
        return Err(ConfigError::OverridePath(path.to_string()));
    }
    map.insert(last.to_string(), new);
    Ok(())
}
