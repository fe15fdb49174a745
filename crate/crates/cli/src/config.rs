use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use vmspos_core::cohort::{RandomConfig, RateBasis};
use vmspos_core::corpus::FilterCriteria;
use vmspos_core::exec::Execution;
use vmspos_core::ivtff::MarkerConfig;
use vmspos_core::stats::{BetaPrior, Thresholds};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Syntax {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub url: Option<String>,
    /// Lowercase hex SHA-256 of the transliteration file.
    pub expected_checksum: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[serde(alias = "markdown")]
    Md,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Md),
            other => Err(format!("unknown format `{other}` (expected json, csv or md)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Md => "md",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv, Format::Md],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub rate_basis: RateBasis,
    /// Ordinals whose spacing-uncertainty rate is reported.
    pub spacing_ordinals: Vec<u32>,
    /// Thresholds for the sweep; a log-spaced default when absent.
    pub p_grid: Option<Vec<f64>>,
    pub execution: Execution,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            rate_basis: RateBasis::default(),
            spacing_ordinals: vec![2, 4],
            p_grid: None,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    pub markers: MarkerConfig,
    pub filter: FilterCriteria,
    pub thresholds: Thresholds,
    pub prior: BetaPrior,
    pub random: RandomConfig,
    pub analysis: AnalysisConfig,
    pub outputs: OutputConfig,
}

fn is_sha256_hex(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl RunConfig {
    /// Loads a TOML config; relative paths inside it resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Syntax {
            path: path.to_owned(),
            source: Box::new(e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.input.path {
            if p.is_relative() {
                cfg.input.path = Some(base.join(p));
            }
        }
        if cfg.outputs.directory.is_relative() {
            cfg.outputs.directory = base.join(&cfg.outputs.directory);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        match (&self.input.path, &self.input.url) {
            (None, None) => return bad("input needs `path` or `url`".into()),
            (Some(_), Some(_)) => return bad("input takes `path` or `url`, not both".into()),
            (None, Some(_)) if self.input.expected_checksum.is_none() => {
                return bad("`expected_checksum` is required when the input is a URL".into())
            }
            _ => {}
        }
        if let Some(c) = &self.input.expected_checksum {
            if !is_sha256_hex(c) {
                return bad(format!("expected_checksum `{c}` is not lowercase hex SHA-256"));
            }
        }
        if self.outputs.formats.is_empty() {
            return bad("at least one output format is required".into());
        }
        self.thresholds
            .validate()
            .or_else(|e| bad(e.to_string()))?;
        if !(self.prior.alpha > 0.0 && self.prior.beta > 0.0) {
            return bad(format!("prior Beta({}, {}) is improper", self.prior.alpha, self.prior.beta));
        }
        if let Some(g) = &self.analysis.p_grid {
            if g.is_empty() || g.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) || g.windows(2).any(|w| w[0] >= w[1]) {
                return bad("p_grid must be non-empty and strictly ascending in (0, 1]".into());
            }
        }
        self.markers
            .validate()
            .or_else(|e| bad(e.to_string()))?;
        Ok(())
    }
}
