//! The declarative configuration file, with environment overrides.
//!
//! Any key can be overridden with `PHISHSCAN__<SECTION>__<KEY>=<value>`
//! (double underscores separate path segments). Values are read as TOML
//! literals when they parse as one and as strings otherwise.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversarial::OptimizerConfig;
use crate::detector::reference::TrainConfig;
use crate::explainer::ImportanceConfig;
use crate::pipeline::PipelineConfig;

pub const ENV_PREFIX: &str = "PHISHSCAN__";
pub const CONFIG_ENV: &str = "PHISHSCAN_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid override {key}: {reason}")]
    Override { key: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    #[default]
    Reference,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScorerConfig {
    pub kind: ScorerKind,
    /// Reference model file.
    pub model: Option<PathBuf>,
    /// `host:port` of an external scorer.
    pub address: Option<String>,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig { kind: ScorerKind::Reference, model: None, address: None, timeout_ms: 10_000, max_in_flight: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerConfig {
    pub importance: ImportanceConfig,
    /// Endpoint of the generative text service; template mode when unset.
    pub generator_url: Option<String>,
    pub generator_model: Option<String>,
    /// Name of the environment variable holding the service API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_concurrent: usize,
    /// Replacement prompt template file.
    pub prompt_path: Option<PathBuf>,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            importance: ImportanceConfig::default(),
            generator_url: None,
            generator_model: None,
            api_key_env: "PHISHSCAN_GENERATOR_KEY".into(),
            timeout_secs: 15,
            max_concurrent: 2,
            prompt_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkConfig {
    pub name: String,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub store_path: PathBuf,
    pub allowlist_path: Option<PathBuf>,
    pub feed_url: String,
    /// Benign verdicts with confidence in `[low, high)` trigger link follow-up.
    pub follow_band: (f64, f64),
    pub max_follow_links: usize,
    pub form_follow_through: bool,
    pub fetch_timeout_secs: u64,
    pub max_body_bytes: usize,
    pub max_redirects: usize,
    pub fetch_rate_per_sec: f64,
    pub benign_ttl_hours: u64,
    pub dedup_window_hours: u64,
    pub queue_capacity: usize,
    pub fetch_workers: usize,
    pub classify_workers: usize,
    pub sinks: Vec<SinkConfig>,
    /// Generate warnings for phishing records.
    pub warnings: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            store_path: PathBuf::from("blocklist.jsonl"),
            allowlist_path: None,
            feed_url: "wss://certstream.calidog.io/".into(),
            follow_band: (0.3, 0.5),
            max_follow_links: 5,
            form_follow_through: true,
            fetch_timeout_secs: 15,
            max_body_bytes: 5 * 1024 * 1024,
            max_redirects: 5,
            fetch_rate_per_sec: 30.0,
            benign_ttl_hours: 24,
            dedup_window_hours: 24,
            queue_capacity: 256,
            fetch_workers: 16,
            classify_workers: 4,
            sinks: Vec::new(),
            warnings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub pipeline: PipelineConfig,
    pub scorer: ScorerConfig,
    pub train: TrainConfig,
    pub optimizer: OptimizerConfig,
    pub explainer: ExplainerConfig,
    pub service: ServiceConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Load `path` (or defaults when `None`) and apply overrides from `env`.
    pub fn load_with<I>(path: Option<&Path>, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
                text.parse()?
            }
            None => toml::Table::new(),
        };
        for (key, value) in env {
            let Some(rest) = key.strip_prefix(ENV_PREFIX) else { continue };
            let segments: Vec<String> = rest.split("__").map(|s| s.to_ascii_lowercase()).collect();
            apply_override(&mut table, &segments, &value).map_err(|reason| ConfigError::Override { key: key.clone(), reason })?;
        }
        Ok(toml::Value::Table(table).try_into()?)
    }

    /// Load with path precedence: explicit path, then `PHISHSCAN_CONFIG`, then defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let from_env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        Self::load_with(path.or(from_env.as_deref()), std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn parse_scalar(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.to_string())),
        Err(_) => toml::Value::String(value.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, path: &[String], value: &str) -> Result<(), String> {
    let (last, parents) = path.split_last().ok_or("empty key")?;
    let mut cur = table;
    for seg in parents {
        let entry = cur.entry(seg.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("{seg} is not a section"))?;
    }
    cur.insert(last.clone(), parse_scalar(value));
    Ok(())
}
