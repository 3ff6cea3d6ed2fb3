//! Pipeline configuration: one TOML document overriding every threshold.
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::crawl::{CrawlLimits, LinkScorer};
use crate::extract::gazetteer::VariantWeights;
use crate::extract::link::LinkerConfig;
use crate::extract::slots::SlotConfig;
use crate::fixtures::WorldVersion;
use crate::fusion::MergePolicy;
use crate::harvest::ExecuteOptions;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file {0} not found")]
    Missing(String),
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path} is malformed: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config value `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KbConfig {
    /// Store directory holding the KB, audit, event and quarantine files.
    pub path: PathBuf,
    /// Page snapshot directory.
    pub snapshots: PathBuf,
}

impl Default for KbConfig {
    fn default() -> Self {
        KbConfig {
            path: PathBuf::from("kb"),
            snapshots: PathBuf::from("snapshots"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarvestConfig {
    /// Adapter registry JSON; the bundled registry when absent.
    pub adapters: Option<PathBuf>,
    /// Only these adapters; every enabled adapter when empty.
    pub only: Vec<String>,
    #[serde(flatten)]
    pub execute: ExecuteOptions,
    /// Skip companies harvested within this many seconds, for adapters
    /// that report record update dates.
    pub resync_horizon_secs: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSection {
    /// Minimum gap between request starts to one host.
    pub delay_ms: u64,
    pub timeout_ms: u64,
    pub proxy: Option<String>,
}

impl Default for HttpSection {
    fn default() -> Self {
        HttpSection {
            delay_ms: 1000,
            timeout_ms: 10_000,
            proxy: None,
        }
    }
}

impl HttpSection {
    pub fn delay(&self) -> Duration {
        Duration::from_millis(self.delay_ms)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrawlConfig {
    #[serde(flatten)]
    pub limits: CrawlLimits,
    #[serde(flatten)]
    pub scorer: LinkScorer,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub linker: LinkerConfig,
    pub weights: VariantWeights,
    pub slots: SlotConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Bearer token to reviewer id.
    pub tokens: BTreeMap<String, String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".to_string(),
            tokens: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureConfig {
    /// Route every fetch to the fixture world instead of the network.
    pub enabled: bool,
    /// Fixture tree; the bundled one when absent.
    pub root: Option<PathBuf>,
    pub version: WorldVersion,
    /// Address of the `fixtures` subcommand's server.
    pub bind: String,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            enabled: false,
            root: None,
            version: WorldVersion::V1,
            bind: "127.0.0.1:8099".to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub kb: KbConfig,
    pub harvest: HarvestConfig,
    pub http: HttpSection,
    pub crawl: CrawlConfig,
    pub extract: ExtractConfig,
    pub fusion: MergePolicy,
    pub service: ServiceConfig,
    pub fixtures: FixtureConfig,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read, parse, validate and resolve relative paths.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        if !path.exists() {
            return Err(ConfigError::Missing(path.display().to_string()));
        }
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = PipelineConfig::from_toml(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.kb.path = resolve(base, &self.kb.path);
        self.kb.snapshots = resolve(base, &self.kb.snapshots);
        if let Some(a) = &self.harvest.adapters {
            self.harvest.adapters = Some(resolve(base, a));
        }
        if let Some(r) = &self.fixtures.root {
            self.fixtures.root = Some(resolve(base, r));
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |field: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(field, format!("{v} is outside [0, 1]")))
            }
        };
        if self.crawl.limits.max_pages == 0 {
            return Err(invalid("crawl.max_pages", "must be positive"));
        }
        if self.harvest.execute.attempts == 0 {
            return Err(invalid("harvest.attempts", "must be positive"));
        }
        if self.harvest.execute.max_consecutive_bad_pages == 0 {
            return Err(invalid("harvest.max_consecutive_bad_pages", "must be positive"));
        }
        if self.http.timeout_ms == 0 {
            return Err(invalid("http.timeout_ms", "must be positive"));
        }
        if self.harvest.resync_horizon_secs.is_some_and(|h| h <= 0) {
            return Err(invalid("harvest.resync_horizon_secs", "must be positive"));
        }
        if !self.extract.weights.is_ordered() {
            return Err(invalid(
                "extract.weights",
                "expected canonical > alias > generated > 0",
            ));
        }
        unit("extract.linker.nil_threshold", self.extract.linker.nil_threshold)?;
        unit("extract.linker.rerank_margin", self.extract.linker.rerank_margin)?;
        unit("crawl.path_weight", self.crawl.scorer.path_weight)?;
        unit("crawl.anchor_weight", self.crawl.scorer.anchor_weight)?;
        if self.extract.linker.coherence_boost < 0.0 {
            return Err(invalid("extract.linker.coherence_boost", "must not be negative"));
        }
        if self.extract.slots.proximity_chars == 0 {
            return Err(invalid("extract.slots.proximity_chars", "must be positive"));
        }
        if self.service.bind.parse::<std::net::SocketAddr>().is_err() {
            return Err(invalid("service.bind", format!("`{}` is not host:port", self.service.bind)));
        }
        if self.fixtures.bind.parse::<std::net::SocketAddr>().is_err() {
            return Err(invalid("fixtures.bind", format!("`{}` is not host:port", self.fixtures.bind)));
        }
        Ok(())
    }
}
