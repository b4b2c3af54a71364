//! Run configuration, loaded from a TOML file with every key optional.

use std::path::{Path, PathBuf};

use benchgen_core::context::SourceSelection;
use benchgen_core::threshold::DEFAULT_MIN_PASS_RATE;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CassetteMode {
    Record,
    #[default]
    Replay,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Ablation {
    CicdOnly,
    TextOnly,
    NoIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RuntimeKind {
    #[default]
    Docker,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub model: String,
    /// Chat-completions base URL; `LLM_API_BASE` overrides it.
    pub api_base: String,
    pub retry_budget: u32,
    pub backoff_base_secs: f64,
    pub requests_per_minute: u32,
    pub request_timeout_secs: u64,
    pub cassette: Option<PathBuf>,
    pub cassette_mode: CassetteMode,
    /// Scripted replies used instead of a live provider (fixtures, recording).
    pub scripted: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            model: "gpt-4o-mini".into(),
            api_base: "https://api.openai.com/v1".into(),
            retry_budget: 3,
            backoff_base_secs: 2.0,
            requests_per_minute: 0,
            request_timeout_secs: 300,
            cassette: None,
            cassette_mode: CassetteMode::Replay,
            scripted: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrowsingConfig {
    pub enabled: bool,
    pub max_pages: usize,
}

impl Default for BrowsingConfig {
    fn default() -> Self {
        BrowsingConfig {
            enabled: true,
            max_pages: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    pub token_budget: usize,
    pub sources: SourceSelection,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            token_budget: 24_000,
            sources: SourceSelection::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxConfig {
    pub runtime: RuntimeKind,
    pub base_image: String,
    pub registry: String,
    pub docker_socket: PathBuf,
    /// Scratch directory of the local runtime; a temporary one if unset.
    pub local_root: Option<PathBuf>,
    pub cpu_limit: f64,
    pub mem_limit_mb: u64,
    pub install_timeout_secs: u64,
    pub test_timeout_secs: u64,
    pub network_during_tests: bool,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            runtime: RuntimeKind::Docker,
            base_image: "benchgen/base:ubuntu22.04".into(),
            registry: "localhost".into(),
            docker_socket: "/var/run/docker.sock".into(),
            local_root: None,
            cpu_limit: 4.0,
            mem_limit_mb: 8192,
            install_timeout_secs: 1800,
            test_timeout_secs: 3600,
            network_during_tests: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub n_per_repo: usize,
    pub scan_cap: usize,
    pub workers: usize,
    pub max_iterations: usize,
    pub min_pass_rate: f64,
    pub reference_store: Option<PathBuf>,
    pub ablation: Option<Ablation>,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            n_per_repo: 10,
            scan_cap: 500,
            workers: 8,
            max_iterations: 4,
            min_pass_rate: DEFAULT_MIN_PASS_RATE,
            reference_store: None,
            ablation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub llm: LlmConfig,
    pub browsing: BrowsingConfig,
    pub context: ContextConfig,
    pub sandbox: SandboxConfig,
    pub build: BuildConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })
    }

    /// Applies an ablation on top of the loaded settings.
    pub fn ablate(&mut self, ablation: Ablation) {
        self.build.ablation = Some(ablation);
        match ablation {
            Ablation::CicdOnly => self.context.sources = SourceSelection::CicdOnly,
            Ablation::TextOnly => self.context.sources = SourceSelection::TextOnly,
            Ablation::NoIteration => self.build.max_iterations = 0,
        }
    }
}
