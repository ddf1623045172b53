//! Experiment configuration, read from JSON.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cases::{CaseTag, CovariateCase};
use super::response::ErrorModel;
use crate::methods::Method;
use crate::select::SelectionMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunnerKind {
    #[default]
    Mse,
    Coverage,
    Mspe,
    Bootstrap,
    Timing,
    RateCheck,
}

/// Input file format of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    #[default]
    Csv,
    F64leColumnar,
}

/// Column transform applied at load time.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Transform {
    #[default]
    None,
    /// Natural log of every covariate column.
    Log,
    /// Natural log of every covariate column except the named ones.
    LogExcluding { columns: Vec<String> },
}

/// A dataset on disk, used by the bootstrap runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: DataFormat,
    /// Response column name (CSV) or index (columnar, as a string).
    pub response: String,
    #[serde(default)]
    pub transform: Transform,
    /// Covariate columns to discard.
    #[serde(default)]
    pub drop: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub runner: RunnerKind,
    pub case: CovariateCase,
    /// `(β₀, β₁ᵀ)`; defaults to all ones.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub error_model: ErrorModel,
    pub n_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub replications: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default)]
    pub mode: SelectionMode,
    #[serde(default = "default_true")]
    pub with_replacement: bool,
    /// Coefficient whose interval is checked (0 is the intercept).
    #[serde(default = "default_target")]
    pub target_coef: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Fresh rows per replication for prediction error.
    #[serde(default = "default_n_new")]
    pub n_new: usize,
    /// Covariate counts for timing; defaults to `[case.p]`.
    #[serde(default)]
    pub p_grid: Option<Vec<usize>>,
    #[serde(default = "default_timing_repeats")]
    pub timing_repeats: usize,
    /// Data to resample for the bootstrap runner; simulated from `case` with
    /// `n_grid[0]` rows when absent.
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
}

fn default_sigma2() -> f64 {
    9.0
}
fn default_true() -> bool {
    true
}
fn default_target() -> usize {
    1
}
fn default_level() -> f64 {
    0.95
}
fn default_n_new() -> usize {
    1000
}
fn default_timing_repeats() -> usize {
    3
}

/// A configuration problem located by JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pointer}: {message}")]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

fn pointer_from_path(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape(key))),
            Segment::Enum { variant } => out.push_str(&format!("/{}", escape(variant))),
            Segment::Unknown => {}
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('~', "~0").replace('/', "~1")
}

/// Name inside the first pair of backticks of a serde message.
fn quoted(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

impl ExperimentConfig {
    /// Parses and validates; errors point at the offending field.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut pointer = pointer_from_path(e.path());
            let message = e.inner().to_string();
            // serde reports a missing or unknown field at its parent
            if message.starts_with("missing field") || message.starts_with("unknown field") {
                if let Some(name) = quoted(&message) {
                    if !pointer.ends_with(&format!("/{}", escape(name))) {
                        pointer.push('/');
                        pointer.push_str(&escape(name));
                    }
                }
            }
            ConfigError::new(pointer, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn beta(&self) -> Vec<f64> {
        self.beta.clone().unwrap_or_else(|| vec![1.0; self.case.p + 1])
    }

    pub fn p_grid(&self) -> Vec<usize> {
        self.p_grid.clone().unwrap_or_else(|| vec![self.case.p])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Err(e) = self.case.generator() {
            let at = match self.case.tag {
                CaseTag::Interactions if self.case.p != super::cases::INTERACTION_P => "/case/p",
                _ if self.case.p == 0 => "/case/p",
                _ => "/case/covariance",
            };
            return Err(ConfigError::new(at, e.to_string()));
        }
        if let Some(b) = &self.beta {
            if b.len() != self.case.p + 1 {
                return Err(ConfigError::new("/beta", format!("expected {} entries, found {}", self.case.p + 1, b.len())));
            }
            if let Some(i) = b.iter().position(|v| !v.is_finite()) {
                return Err(ConfigError::new(format!("/beta/{i}"), "must be finite"));
            }
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(ConfigError::new("/sigma2", "must be a finite non-negative number"));
        }
        let min_reps = if self.runner == RunnerKind::Bootstrap { 2 } else { 1 };
        if self.replications < min_reps {
            return Err(ConfigError::new("/replications", format!("must be at least {min_reps}")));
        }
        if self.methods.is_empty() {
            return Err(ConfigError::new("/methods", "must list at least one method"));
        }
        if self.k_grid.is_empty() {
            return Err(ConfigError::new("/k_grid", "must not be empty"));
        }
        let generated = !(self.runner == RunnerKind::Bootstrap && self.dataset.is_some());
        if generated && self.n_grid.is_empty() {
            return Err(ConfigError::new("/n_grid", "must not be empty"));
        }
        if let Some(i) = self.n_grid.iter().position(|&n| n == 0) {
            return Err(ConfigError::new(format!("/n_grid/{i}"), "must be positive"));
        }
        let min_n = self.n_grid.iter().copied().min().unwrap_or(usize::MAX);
        let ps = self.p_grid();
        if let Some(i) = ps.iter().position(|&p| p == 0) {
            return Err(ConfigError::new(format!("/p_grid/{i}"), "must be positive"));
        }
        let p_max = ps.iter().copied().max().unwrap_or(self.case.p).max(self.case.p);
        let needs_2p = self.methods.contains(&Method::Dopt);
        for (i, &k) in self.k_grid.iter().enumerate() {
            if generated && k > min_n {
                return Err(ConfigError::new(format!("/k_grid/{i}"), format!("k = {k} exceeds the smallest n = {min_n}")));
            }
            let floor = if needs_2p { (2 * p_max).max(p_max + 2) } else { p_max + 2 };
            if k < floor {
                return Err(ConfigError::new(format!("/k_grid/{i}"), format!("k = {k} is below the minimum {floor} for p = {p_max}")));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(ConfigError::new("/level", "must lie strictly between 0 and 1"));
        }
        if self.target_coef > self.case.p {
            return Err(ConfigError::new("/target_coef", format!("must be at most p = {}", self.case.p)));
        }
        if self.n_new == 0 {
            return Err(ConfigError::new("/n_new", "must be positive"));
        }
        if self.timing_repeats == 0 {
            return Err(ConfigError::new("/timing_repeats", "must be positive"));
        }
        if self.p_grid.is_some() && self.runner != RunnerKind::Timing {
            return Err(ConfigError::new("/p_grid", "only the timing runner uses p_grid"));
        }
        if self.p_grid.is_some() && self.case.tag == CaseTag::Interactions {
            return Err(ConfigError::new("/p_grid", "the interactions case has fixed p"));
        }
        if self.runner == RunnerKind::RateCheck && self.n_grid.len() < 2 {
            return Err(ConfigError::new("/n_grid", "rate check needs at least two sizes"));
        }
        Ok(())
    }
}
