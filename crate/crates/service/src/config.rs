use std::fs;
use std::path::{Path, PathBuf};

use sir_core::engine::{DEFAULT_QAC_LIMIT, DEFAULT_SEARCH_LIMIT};
use sir_core::suggest::DEFAULT_TRENDING_WINDOW;
use sir_core::Timestamp;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: `{value}`")]
    BadValue { key: String, value: String },
}

/// Service settings. Files hold `key = value` lines (`#` comments allowed);
/// `SIR_<KEY>` environment variables override them.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Directory holding the default data files.
    pub data_dir: PathBuf,
    pub graph: Option<PathBuf>,
    pub query_log: Option<PathBuf>,
    pub ledger: Option<PathBuf>,
    pub distance_index: Option<PathBuf>,
    /// Per-request latency records; in memory only when unset.
    pub request_log: Option<PathBuf>,
    pub landmarks: Option<usize>,
    pub trending_window: Timestamp,
    pub search_limit: usize,
    pub qac_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            graph: None,
            query_log: None,
            ledger: None,
            distance_index: None,
            request_log: None,
            landmarks: None,
            trending_window: DEFAULT_TRENDING_WINDOW,
            search_limit: DEFAULT_SEARCH_LIMIT,
            qac_limit: DEFAULT_QAC_LIMIT,
        }
    }
}

const KEYS: [&str; 12] = [
    "host",
    "port",
    "data_dir",
    "graph",
    "query_log",
    "ledger",
    "distance_index",
    "request_log",
    "landmarks",
    "trending_window",
    "search_limit",
    "qac_limit",
];

impl ServiceConfig {
    /// Defaults, then `path` if given, then `SIR_*` variables from the
    /// process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            config.apply_text(&text)?;
        }
        config.apply_env(std::env::vars())?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix("SIR_") else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            if KEYS.contains(&key.as_str()) {
                self.set(&key, &value)?;
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "host" => self.host = value.to_string(),
            "port" => self.port = value.parse().map_err(|_| bad())?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "graph" => self.graph = path(),
            "query_log" => self.query_log = path(),
            "ledger" => self.ledger = path(),
            "distance_index" => self.distance_index = path(),
            "request_log" => self.request_log = path(),
            "landmarks" => {
                self.landmarks = match value {
                    "" | "auto" => None,
                    v => Some(v.parse().ok().filter(|&k| k > 0).ok_or_else(bad)?),
                }
            }
            "trending_window" => self.trending_window = value.parse().ok().filter(|&w| w > 0).ok_or_else(bad)?,
            "search_limit" => self.search_limit = value.parse().ok().filter(|&l| l > 0).ok_or_else(bad)?,
            "qac_limit" => self.qac_limit = value.parse().ok().filter(|&l| l > 0).ok_or_else(bad)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn graph_path(&self) -> PathBuf {
        self.graph.clone().unwrap_or_else(|| self.data_dir.join("graph.jsonl"))
    }

    pub fn query_log_path(&self) -> PathBuf {
        self.query_log.clone().unwrap_or_else(|| self.data_dir.join("queries.jsonl"))
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.ledger.clone().unwrap_or_else(|| self.data_dir.join("ledger.jsonl"))
    }

    pub fn distance_index_path(&self) -> PathBuf {
        self.distance_index
            .clone()
            .unwrap_or_else(|| self.data_dir.join("distance_index.json"))
    }
}
