//! Experiment configuration: one JSON document per run.
//!
//! ```json
//! {
//!   "subcommand": "moments",
//!   "seed": 7,
//!   "output": "runs/moments",
//!   "params": { "scan": "slab", "n_values": [8, 16, 32] }
//! }
//! ```
//!
//! Every key is optional except inside `params`, whose variant tag (`scan`,
//! `manifold`, `mode`) is required whenever `params` is present. Unknown keys
//! are rejected everywhere.

use crate::experiments::{decouple, energy, kakeya, moments, oracle, vdc};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Moments,
    Decouple,
    Kakeya,
    Energy,
    Vdc,
    OracleCheck,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Moments => "moments",
            Subcommand::Decouple => "decouple",
            Subcommand::Kakeya => "kakeya",
            Subcommand::Energy => "energy",
            Subcommand::Vdc => "vdc",
            Subcommand::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Moments(moments::MomentsParams),
    Decouple(decouple::DecoupleParams),
    Kakeya(kakeya::KakeyaParams),
    Energy(energy::EnergyParams),
    Vdc(vdc::VdcParams),
    OracleCheck(oracle::OracleParams),
}

/// A fully resolved configuration (defaults filled in). It is read back
/// through [`parse_config`], never deserialized directly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub seed: u64,
    pub output: Option<String>,
    pub params: Params,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig<'a> {
    subcommand: Option<Subcommand>,
    seed: Option<u64>,
    output: Option<String>,
    #[serde(borrow)]
    params: Option<&'a RawValue>,
}

/// A configuration problem, located at a 1-based line of the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// A semantic problem with a parameter, reported against its key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invalid {
    pub key: &'static str,
    pub message: String,
}

impl Invalid {
    pub fn new(key: &'static str, message: impl Into<String>) -> Self {
        Self { key, message: message.into() }
    }
}

pub fn ensure(cond: bool, key: &'static str, message: impl FnOnce() -> String) -> Result<(), Invalid> {
    if cond {
        Ok(())
    } else {
        Err(Invalid::new(key, message()))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of the first `"key"` at or after `from`, if any.
fn line_of_key(text: &str, key: &str, from: usize) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text[from.min(text.len())..].find(&needle).map(|i| line_of(text, from + i))
}

/// Field name quoted in backticks by serde messages such as
/// ``unknown field `foo` ``.
fn quoted_field(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

fn params_for(sub: Subcommand, raw: Option<&str>) -> serde_json::Result<Params> {
    fn parse<T: for<'de> Deserialize<'de> + Default>(raw: Option<&str>) -> serde_json::Result<T> {
        raw.map_or_else(|| Ok(T::default()), serde_json::from_str)
    }
    Ok(match sub {
        Subcommand::Moments => Params::Moments(parse(raw)?),
        Subcommand::Decouple => Params::Decouple(parse(raw)?),
        Subcommand::Kakeya => Params::Kakeya(parse(raw)?),
        Subcommand::Energy => Params::Energy(parse(raw)?),
        Subcommand::Vdc => Params::Vdc(parse(raw)?),
        Subcommand::OracleCheck => Params::OracleCheck(parse(raw)?),
    })
}

/// Parse and validate a configuration for the subcommand chosen on the
/// command line (`None`: take it from the document).
pub fn parse_config(text: &str, requested: Option<Subcommand>) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
        let line = quoted_field(&e.to_string())
            .and_then(|k| line_of_key(text, k, 0))
            .unwrap_or(e.line().max(1));
        ConfigError { line, message: e.to_string() }
    })?;
    let subcommand = match (requested, raw.subcommand) {
        (Some(a), Some(b)) if a != b => {
            return Err(ConfigError {
                line: line_of_key(text, "subcommand", 0).unwrap_or(1),
                message: format!("config is for `{}` but `{}` was requested", b.name(), a.name()),
            })
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => {
            return Err(ConfigError { line: 1, message: "no subcommand given".into() });
        }
    };
    let params_start = raw.params.map_or(0, |p| p.get().as_ptr() as usize - text.as_ptr() as usize);
    let params_text = raw.params.map(RawValue::get);
    let params = params_for(subcommand, params_text).map_err(|e| {
        let msg = e.to_string();
        let line = quoted_field(&msg)
            .and_then(|k| line_of_key(text, k, params_start))
            .or_else(|| (e.line() > 0).then(|| line_of(text, params_start) + e.line() - 1))
            .unwrap_or_else(|| line_of(text, params_start));
        ConfigError { line, message: format!("params: {msg}") }
    })?;
    let config = ExperimentConfig { subcommand, seed: raw.seed.unwrap_or(0), output: raw.output, params };
    config.validate().map_err(|inv| ConfigError {
        line: line_of_key(text, inv.key, params_start).unwrap_or_else(|| line_of(text, params_start)),
        message: format!("`{}`: {}", inv.key, inv.message),
    })?;
    Ok(config)
}

impl ExperimentConfig {
    /// Defaults for a subcommand run without a config file.
    pub fn default_for(subcommand: Subcommand) -> Self {
        Self { subcommand, seed: 0, output: None, params: params_for(subcommand, None).expect("defaults parse") }
    }

    pub fn validate(&self) -> Result<(), Invalid> {
        match &self.params {
            Params::Moments(p) => p.validate(),
            Params::Decouple(p) => p.validate(),
            Params::Kakeya(p) => p.validate(),
            Params::Energy(p) => p.validate(),
            Params::Vdc(p) => p.validate(),
            Params::OracleCheck(p) => p.validate(),
        }
    }

    /// Round trip through the document format (used by `reproduce`).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
