use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::Deserialize;
use sgtod_core::backends::{Backend, BackendError, Endpoint, OracleBackend, RemoteBackend, RuleAgent, DEFAULT_TIMEOUT};
use sgtod_core::eval::ContextMode;
use sgtod_core::metrics::{TurnBucket, DEFAULT_BUCKETS};
use sgtod_core::Dialogue;

/// A bad flag, config value or path. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Settings shared by every subcommand. The config file is flat TOML with
/// these keys; command-line flags override it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schemas: Option<PathBuf>,
    pub dialogues: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub variants: Option<Vec<PathBuf>>,
    pub surface_variants: Option<usize>,
    pub backend: Option<String>,
    pub timeout_secs: Option<u64>,
    pub workers: Option<usize>,
    pub context_mode: Option<String>,
    pub seed: Option<u64>,
    pub dialogs: Option<usize>,
    pub buckets: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub service: Option<String>,
    pub input: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        $(if $top.$field.is_some() { $base.$field = $top.$field; })*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
    }

    /// `top` wins wherever it has a value.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        overlay!(self, top; schemas, dialogues, split, variants, surface_variants, backend, timeout_secs,
            workers, context_mode, seed, dialogs, buckets, out, format, service, input);
        self
    }

    pub fn existing(&self, name: &str, value: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
        let path = value.clone().ok_or_else(|| usage(format!("--{name} is required")))?;
        if !path.exists() {
            return Err(usage(format!("{name} path {} does not exist", path.display())));
        }
        Ok(path)
    }

    pub fn optional_existing(&self, name: &str, value: &Option<PathBuf>) -> anyhow::Result<Option<PathBuf>> {
        match value {
            None => Ok(None),
            Some(_) => self.existing(name, value).map(Some),
        }
    }

    pub fn backend_choice(&self, default: &str) -> anyhow::Result<BackendChoice> {
        self.backend.as_deref().unwrap_or(default).parse().map_err(usage)
    }

    pub fn timeout(&self) -> Duration {
        self.timeout_secs.map(Duration::from_secs).unwrap_or(DEFAULT_TIMEOUT)
    }

    pub fn context_mode(&self) -> anyhow::Result<ContextMode> {
        match &self.context_mode {
            None => Ok(ContextMode::default()),
            Some(m) => m.parse().map_err(usage),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1).max(1)
    }

    pub fn buckets(&self) -> anyhow::Result<Vec<TurnBucket>> {
        match &self.buckets {
            None => Ok(DEFAULT_BUCKETS.to_vec()),
            Some(b) => TurnBucket::parse_list(b).map_err(|e| usage(e.to_string())),
        }
    }

    pub fn format(&self) -> anyhow::Result<Format> {
        self.format.as_deref().unwrap_or("table").parse().map_err(usage)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected table or json)")),
        }
    }
}

/// `oracle`, `rule` or `remote:ENDPOINT`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    Oracle,
    Rule,
    Remote(Endpoint),
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oracle" => Ok(BackendChoice::Oracle),
            "rule" | "rule-agent" => Ok(BackendChoice::Rule),
            _ => match s.strip_prefix("remote:") {
                Some(endpoint) => endpoint.parse().map(BackendChoice::Remote),
                None => Err(format!(
                    "unknown backend `{s}` (expected oracle, rule or remote:ENDPOINT)"
                )),
            },
        }
    }
}

impl BackendChoice {
    /// Builds a backend. The oracle replays `gold`.
    pub fn build(&self, gold: &[Dialogue], timeout: Duration) -> Result<Box<dyn Backend>, BackendError> {
        Ok(match self {
            BackendChoice::Oracle => Box::new(OracleBackend::from_corpus(gold)),
            BackendChoice::Rule => Box::new(RuleAgent::new()),
            BackendChoice::Remote(endpoint) => Box::new(RemoteBackend::connect(endpoint, timeout)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: RunConfig = toml::from_str("seed = 3\nbackend = \"rule\"\nworkers = 4").unwrap();
        let flags = RunConfig {
            seed: Some(9),
            ..Default::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.backend.as_deref(), Some("rule"));
        assert_eq!(merged.workers(), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sead = 3").is_err());
    }

    #[test]
    fn backend_selector() {
        assert_eq!("oracle".parse(), Ok(BackendChoice::Oracle));
        assert_eq!("rule-agent".parse(), Ok(BackendChoice::Rule));
        assert_eq!(
            "remote:tcp://127.0.0.1:9".parse(),
            Ok(BackendChoice::Remote(Endpoint::Tcp("127.0.0.1:9".into())))
        );
        assert!("remote:ftp://x".parse::<BackendChoice>().is_err());
        assert!("gpt".parse::<BackendChoice>().is_err());
    }
}
