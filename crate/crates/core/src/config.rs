//! Run configuration file and `KEY=VALUE` overrides.
//!
//! One TOML document with optional sections:
//!
//! ```toml
//! [model]      # analytic ModelParams
//! q = 1.0
//! [analytic]   # q grid of the sweep
//! q_start = 0.05
//! [scenario]   # simulator ScenarioConfig
//! uplink_mode = "SUL"
//! [validate]   # saturated bridge run
//! n_cat4 = 3
//! ```
//!
//! Every key has a default, unknown keys are rejected. Overrides use dotted
//! paths such as `scenario.mcot_ms=4` or `model.detection.tnr_db=3`.

use crate::analytic::{ModelParams, SensingModel};
use crate::sim::ScenarioConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("bad override '{0}': expected KEY=VALUE with a dotted key")]
    Override(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticConfig {
    pub q_start: f64,
    pub q_stop: f64,
    pub q_step: f64,
}

impl Default for AnalyticConfig {
    fn default() -> Self {
        Self { q_start: 0.05, q_stop: 1.0, q_step: 0.05 }
    }
}

/// Saturated network for the simulation-vs-fixed-point check. Window,
/// stage cap and `q` come from `[model]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub n_wifi: u32,
    pub n_cat4: u32,
    pub slots: u64,
    pub seed: u64,
    pub sensing: SensingModel,
    /// Relative error bound per class.
    pub tolerance: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { n_wifi: 0, n_cat4: 2, slots: 1_000_000, seed: 1, sensing: SensingModel::Ideal, tolerance: 0.02 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelParams,
    pub analytic: AnalyticConfig,
    pub scenario: ScenarioConfig,
    pub validate: ValidateConfig,
}

/// Value text parsed as TOML when possible, else taken as a string.
fn parse_value(text: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Probe {
        v: toml::Value,
    }
    match toml::from_str::<Probe>(&format!("v = {text}")) {
        Ok(p) => p.v,
        Err(_) => toml::Value::String(text.to_string()),
    }
}

/// Set `key` (dotted path) to `value` inside a TOML table.
pub fn apply_override(doc: &mut toml::Value, assignment: &str) -> Result<(), ConfigError> {
    let bad = || ConfigError::Override(assignment.to_string());
    let (key, value) = assignment.split_once('=').ok_or_else(bad)?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.len() < 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(bad());
    }
    let mut cur = doc;
    for p in &parts[..parts.len() - 1] {
        let table = cur.as_table_mut().ok_or_else(bad)?;
        cur = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = cur.as_table_mut().ok_or_else(bad)?;
    table.insert(parts[parts.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl Config {
    /// Parse TOML text, apply overrides, then deserialize.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        doc.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|source| ConfigError::Read { path: p.display().to_string(), source })?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
