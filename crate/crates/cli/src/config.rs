//! Flat key-value run configuration.
//!
//! The file format is one `key = value` pair per line with `#` comments.
//! Unknown and duplicated keys are hard errors: a config file is an
//! experiment record, so anything the runner would silently ignore is a
//! provenance leak. Command-line flags override file values after parsing.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use qsigma::VerifyConfig;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(ConfigError(format!("format must be csv or json, got '{other}'"))),
        }
    }
}

/// Everything a run needs; every field has a default so a config file can
/// set only what it changes.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub n: u64,
    pub step: f64,
    pub horizon: f64,
    pub model: Option<String>,
    /// `None` means the registry default selection; `Some(empty)` runs
    /// nothing.
    pub identities: Option<Vec<String>>,
    pub z_crit: f64,
    pub out: PathBuf,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 100_000,
            step: 2f64.powi(-10),
            horizon: 1.0,
            model: None,
            identities: None,
            z_crit: 4.0,
            out: PathBuf::from("reports"),
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            seed: self.seed,
            n: self.n,
            step: self.step,
            horizon: self.horizon,
            z_crit: self.z_crit,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(ConfigError("n must be positive".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(ConfigError(format!("step must be positive, got {}", self.step)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(ConfigError(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.z_crit > 0.0 && self.z_crit.is_finite()) {
            return Err(ConfigError(format!("z_crit must be positive, got {}", self.z_crit)));
        }
        if let Some(ids) = &self.identities {
            let known = qsigma::all_ids();
            for id in ids {
                if !known.contains(&id.as_str()) {
                    return Err(ConfigError(format!("unknown identity '{id}'")));
                }
            }
        }
        if let Some(model) = &self.model {
            parse_model(model)?;
        }
        Ok(())
    }
}

/// A simulable model name: `bm`, `absbm`, `expmart`, `bessel3`, or
/// `bessel:<dimension>` with dimension in (0, 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimModel {
    Bm,
    AbsBm,
    ExpMart,
    Bessel3,
    Bessel(f64),
}

pub fn parse_model(s: &str) -> Result<SimModel, ConfigError> {
    match s {
        "bm" => Ok(SimModel::Bm),
        "absbm" => Ok(SimModel::AbsBm),
        "expmart" => Ok(SimModel::ExpMart),
        "bessel3" => Ok(SimModel::Bessel3),
        other => {
            if let Some(dim) = other.strip_prefix("bessel:") {
                let delta: f64 = dim
                    .parse()
                    .map_err(|_| ConfigError(format!("bad bessel dimension '{dim}'")))?;
                if delta > 0.0 && delta < 2.0 {
                    Ok(SimModel::Bessel(delta))
                } else {
                    Err(ConfigError(format!("bessel dimension must lie in (0, 2), got {delta}")))
                }
            } else {
                Err(ConfigError(format!(
                    "unknown model '{other}' (expected bm, absbm, expmart, bessel3, or bessel:<dim>)"
                )))
            }
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse::<T>()
        .map_err(|_| ConfigError(format!("key '{key}': cannot parse '{value}'")))
}

/// Parses a config file. Every key is checked against the schema; the
/// error message always names the offending key or line.
pub fn parse_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config '{}': {e}", path.display())))?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(ConfigError(format!("key '{key}' given twice")));
        }
        match key {
            "seed" => cfg.seed = parse_num(key, value)?,
            "n" => cfg.n = parse_num(key, value)?,
            "step" => cfg.step = parse_num(key, value)?,
            "horizon" => cfg.horizon = parse_num(key, value)?,
            "model" => cfg.model = Some(value.to_string()),
            "identities" => {
                let ids: Vec<String> = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                cfg.identities = Some(ids);
            }
            "z_crit" => cfg.z_crit = parse_num(key, value)?,
            "out" => cfg.out = PathBuf::from(value),
            "format" => cfg.format = value.parse()?,
            other => return Err(ConfigError(format!("unknown key '{other}'"))),
        }
    }
    Ok(cfg)
}
