//! Run configuration: the single serializable description of everything a
//! command needs, plus the parsers that build one from command-line
//! strings.
//!
//! A [`RunConfig`] captures the command, the model, the energy, the
//! scales, the seed, and the output destination. Seeds are always
//! explicit — nothing in this binary consults the clock or the OS entropy
//! pool for anything that affects results — so a config fully determines
//! its artifacts, and configs round-trip through JSON bit-exactly.
//!
//! The [`RunManifest`] is the run's receipt: config hash, tool version,
//! timestamps, a per-command summary, and the exit status. Timestamps
//! make manifests deliberately non-reproducible, which is why they are
//! written next to data artifacts (`<out>.manifest.json`), never into
//! them.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use symek::ModelDescriptor;
use thiserror::Error;

/// Configuration and argument errors. Every variant is a problem with the
/// request, not with the mathematics, and maps to exit code 2.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {detail}")]
    ConfigFile { path: String, detail: String },
    #[error("config file is not a valid run configuration: {0}")]
    ConfigJson(String),
    #[error("invalid model '{spec}': {detail}")]
    Model { spec: String, detail: String },
    #[error("invalid functional '{spec}': {detail}")]
    Functional { spec: String, detail: String },
    #[error("invalid schedule '{spec}' at segment {position}: {detail}")]
    Schedule {
        spec: String,
        position: usize,
        detail: String,
    },
    #[error("invalid format '{0}': expected json or csv")]
    Format(String),
    #[error("{0}")]
    Invalid(String),
}

/// Which pipeline a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    VerifyAxioms,
    CheckMonotone,
    Ekeland,
    SymmetricEkeland,
    Sps,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CommandKind::VerifyAxioms => "verify-axioms",
            CommandKind::CheckMonotone => "check-monotone",
            CommandKind::Ekeland => "ekeland",
            CommandKind::SymmetricEkeland => "symmetric-ekeland",
            CommandKind::Sps => "sps",
        };
        f.write_str(name)
    }
}

/// Artifact encoding. CSV is the plotting-friendly stage table and only
/// the staged run produces one; everything else is JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(ConfigError::Format(other.to_string())),
        }
    }
}

/// An energy by name plus its construction parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

/// Everything one run needs. Optional fields are only required by the
/// commands that consume them; [`RunConfig::validate`] enforces that.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model: ModelDescriptor,
    #[serde(default)]
    pub functional: Option<FunctionalSpec>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Stage scales for the staged run, strictly decreasing.
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
    /// When set, the staged run also extracts a limit candidate at this
    /// resolution.
    #[serde(default)]
    pub conv_tol: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub output_path: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_samples() -> usize {
    1000
}

impl RunConfig {
    /// Cross-field validation: every command states exactly what it
    /// needs, so a bad request fails before any work starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let needs_functional = !matches!(self.command, CommandKind::VerifyAxioms);
        if needs_functional && self.functional.is_none() {
            return Err(ConfigError::Invalid(format!(
                "{} requires --functional",
                self.command
            )));
        }
        if matches!(
            self.command,
            CommandKind::Ekeland | CommandKind::SymmetricEkeland
        ) {
            for (flag, value) in [("--rho", self.rho), ("--sigma", self.sigma)] {
                match value {
                    None => {
                        return Err(ConfigError::Invalid(format!(
                            "{} requires {flag}",
                            self.command
                        )))
                    }
                    Some(v) if !(v > 0.0) || !v.is_finite() => {
                        return Err(ConfigError::Invalid(format!(
                            "{flag} must be a finite positive number, got {v}"
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        if self.command == CommandKind::Sps && self.schedule.is_none() {
            return Err(ConfigError::Invalid("sps requires --schedule".into()));
        }
        if let Some(schedule) = &self.schedule {
            validate_schedule(schedule, "<config schedule>")?;
        }
        if let Some(tol) = self.conv_tol {
            if !(tol > 0.0) || !tol.is_finite() {
                return Err(ConfigError::Invalid(format!(
                    "--conv-tol must be a finite positive number, got {tol}"
                )));
            }
        }
        if self.samples == 0 {
            return Err(ConfigError::Invalid("--samples must be at least 1".into()));
        }
        if self.format == OutputFormat::Csv && self.command != CommandKind::Sps {
            return Err(ConfigError::Invalid(format!(
                "{} produces JSON only; csv is available for sps",
                self.command
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical (compact JSON) encoding — the identity a
    /// manifest records.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// The run's receipt: what ran, from which config, when, and how it
/// ended. Written as `<out>.manifest.json` next to the data artifact so
/// the artifact itself stays byte-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub command: CommandKind,
    pub summary: serde_json::Value,
    pub exit_status: i32,
}

/// Parses `kind:n` (vector) or `kind:n:h` (grid) into a model.
pub fn parse_model(spec: &str) -> Result<ModelDescriptor, ConfigError> {
    let err = |detail: &str| ConfigError::Model {
        spec: spec.to_string(),
        detail: detail.to_string(),
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["vector", n] => {
            let n: usize = n.parse().map_err(|_| err("size is not an integer"))?;
            ModelDescriptor::vector(n).map_err(|e| err(&e.to_string()))
        }
        ["grid1d", n, h] => {
            let n: usize = n.parse().map_err(|_| err("size is not an integer"))?;
            let h: f64 = h.parse().map_err(|_| err("mesh width is not a number"))?;
            ModelDescriptor::grid1d(n, h).map_err(|e| err(&e.to_string()))
        }
        ["grid1d"] | ["grid1d", _] => Err(err("grid models need kind:n:h (e.g. grid1d:17:0.5)")),
        _ => Err(err("expected vector:n or grid1d:n:h")),
    }
}

/// Parses `name` or `name:k=v,k=v,...` into an energy spec.
pub fn parse_functional(spec: &str) -> Result<FunctionalSpec, ConfigError> {
    let err = |detail: String| ConfigError::Functional {
        spec: spec.to_string(),
        detail,
    };
    let (name, rest) = match spec.split_once(':') {
        None => (spec, None),
        Some((name, rest)) => (name, Some(rest)),
    };
    if name.is_empty() {
        return Err(err("name is empty".into()));
    }
    let mut params = BTreeMap::new();
    if let Some(rest) = rest {
        for (i, pair) in rest.split(',').enumerate() {
            let (key, value) = pair.split_once('=').ok_or_else(|| {
                err(format!("parameter {} ('{pair}') is not key=value", i + 1))
            })?;
            if key.is_empty() || value.is_empty() {
                return Err(err(format!("parameter {} has an empty key or value", i + 1)));
            }
            if params.insert(key.to_string(), value.to_string()).is_some() {
                return Err(err(format!("parameter '{key}' given twice")));
            }
        }
    }
    Ok(FunctionalSpec {
        name: name.to_string(),
        params,
    })
}

/// Parses `geometric:<ratio>:<count>` (scales `ratio^1 .. ratio^count`)
/// or `list:<v1,v2,...>` into a strictly decreasing positive schedule.
pub fn parse_schedule(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let err = |position: usize, detail: String| ConfigError::Schedule {
        spec: spec.to_string(),
        position,
        detail,
    };
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| err(1, "expected geometric:<ratio>:<count> or list:<v1,...>".into()))?;
    match kind {
        "geometric" => {
            let (ratio, count) = rest
                .split_once(':')
                .ok_or_else(|| err(2, "expected geometric:<ratio>:<count>".into()))?;
            let ratio: f64 = ratio
                .parse()
                .map_err(|_| err(2, format!("ratio '{ratio}' is not a number")))?;
            if !(ratio > 0.0 && ratio < 1.0) {
                return Err(err(
                    2,
                    format!("ratio must be strictly between 0 and 1, got {ratio}"),
                ));
            }
            let count: usize = count
                .parse()
                .map_err(|_| err(3, format!("count '{count}' is not an integer")))?;
            if count == 0 {
                return Err(err(3, "count must be at least 1".into()));
            }
            let schedule: Vec<f64> = (1..=count as i32).map(|j| ratio.powi(j)).collect();
            validate_schedule(&schedule, spec)?;
            Ok(schedule)
        }
        "list" => {
            let mut schedule = Vec::new();
            for (i, item) in rest.split(',').enumerate() {
                let value: f64 = item
                    .parse()
                    .map_err(|_| err(i + 2, format!("'{item}' is not a number")))?;
                schedule.push(value);
            }
            validate_schedule(&schedule, spec)?;
            Ok(schedule)
        }
        other => Err(err(1, format!("unknown schedule kind '{other}'"))),
    }
}

fn validate_schedule(schedule: &[f64], spec: &str) -> Result<(), ConfigError> {
    let err = |position: usize, detail: String| ConfigError::Schedule {
        spec: spec.to_string(),
        position,
        detail,
    };
    if schedule.is_empty() {
        return Err(err(1, "schedule is empty".into()));
    }
    for (i, &value) in schedule.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(err(
                i + 2,
                format!("scale {value} is not a finite positive number"),
            ));
        }
        if i > 0 && value >= schedule[i - 1] {
            return Err(err(
                i + 2,
                format!(
                    "scale {value} does not decrease below its predecessor {}",
                    schedule[i - 1]
                ),
            ));
        }
    }
    Ok(())
}
