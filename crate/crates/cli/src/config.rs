//! One TOML file plus `NEWSRAG_` environment overrides.
//!
//! `NEWSRAG_LLM__ENDPOINT_URL=http://host:8081` sets `[llm] endpoint_url`.
//! Values are parsed as TOML scalars when possible (`4`, `true`, `0.5`) and
//! taken as strings otherwise.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use newsrag::chunker::ChunkPolicy;
use newsrag::embed::EmbedderConfig;
use newsrag::engine::EngineConfig;
use newsrag::eval::{EvalConfig, JudgeConfig};
use newsrag::llm::LlmClientConfig;
use newsrag::qa::QaGenConfig;
use newsrag::{Error, Result};
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "NEWSRAG_";

/// Variables read by the CLI itself rather than mapped onto config keys.
const RESERVED_ENV: &[&str] = &["NEWSRAG_CONFIG", "NEWSRAG_LOG"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    #[default]
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            LogLevel::Error => "error",
            LogLevel::Warn => "warn",
            LogLevel::Info => "info",
            LogLevel::Debug => "debug",
            LogLevel::Trace => "trace",
        }
    }
}

impl fmt::Display for LogLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LogLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "error" => Ok(LogLevel::Error),
            "warn" | "warning" => Ok(LogLevel::Warn),
            "info" => Ok(LogLevel::Info),
            "debug" => Ok(LogLevel::Debug),
            "trace" => Ok(LogLevel::Trace),
            other => Err(format!("unknown log level {other:?}")),
        }
    }
}

/// Everything a run needs. The service reads the top-level keys plus
/// `embedder`, `llm` and `engine`; batch verbs read the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind_addr: String,
    pub snapshot_path: PathBuf,
    pub log_level: LogLevel,
    pub embedder: EmbedderConfig,
    pub llm: LlmClientConfig,
    pub engine: EngineConfig,
    pub chunker: ChunkPolicy,
    pub judge: JudgeConfig,
    pub eval: EvalConfig,
    pub qa: QaGenConfig,
    /// Seconds between endpoint probes while the service is not ready.
    pub probe_interval_s: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind_addr: "127.0.0.1:8080".into(),
            snapshot_path: PathBuf::from("index.nrvi"),
            log_level: LogLevel::Info,
            embedder: EmbedderConfig::default(),
            llm: LlmClientConfig::default(),
            engine: EngineConfig::default(),
            chunker: ChunkPolicy::default(),
            judge: JudgeConfig::default(),
            eval: EvalConfig::default(),
            qa: QaGenConfig::default(),
            probe_interval_s: 5,
        }
    }
}

impl ServiceConfig {
    /// Reads `path` (if any), then applies overrides from `vars`.
    pub fn load(
        path: Option<&Path>,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| {
                    Error::InvalidConfig(format!("{}: {}", p.display(), e.message()))
                })?
            }
            None => toml::Table::new(),
        };
        let mut overrides: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX) && !RESERVED_ENV.contains(&k.as_str()))
            .collect();
        overrides.sort();
        for (key, raw) in overrides {
            let path: Vec<String> = key[ENV_PREFIX.len()..]
                .split("__")
                .map(str::to_ascii_lowercase)
                .collect();
            set_path(&mut table, &path, parse_scalar(&raw))
                .map_err(|m| Error::InvalidConfig(format!("{key}: {m}")))?;
        }
        let cfg: ServiceConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_env(path: Option<&Path>) -> Result<Self> {
        Self::load(path, std::env::vars())
    }

    pub fn validate(&self) -> Result<()> {
        if self.bind_addr.parse::<std::net::SocketAddr>().is_err() {
            return Err(Error::InvalidConfig(format!(
                "bind_addr {:?} is not host:port",
                self.bind_addr
            )));
        }
        self.chunker.validate()?;
        self.engine.validate()?;
        self.llm.validate()?;
        self.eval.validate()?;
        Ok(())
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(
    table: &mut toml::Table,
    path: &[String],
    value: toml::Value,
) -> std::result::Result<(), String> {
    let (last, parents) = path.split_last().ok_or("empty key")?;
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| format!("{p} is not a table"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}
