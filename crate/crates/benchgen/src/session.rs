//! Construction of the model provider, sandbox runtime, forge, and page
//! fetcher from a run configuration.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use crate::config::{CassetteMode, Config, RuntimeKind};
use crate::fetch::{HttpFetcher, PageFetcher};
use crate::forge::{FixtureForge, Forge, ForgeError, GithubForge};
use crate::llm::cassette::{Cassette, CassetteError};
use crate::llm::gateway::Gateway;
use crate::llm::http::HttpProvider;
use crate::llm::scripted::ScriptedProvider;
use crate::llm::{ChatProvider, Retrying};
use crate::sandbox::docker::DockerRuntime;
use crate::sandbox::local::LocalRuntime;
use crate::sandbox::{Runtime, SandboxError};

const PAGE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("replay mode needs a cassette or a scripted provider")]
    NothingToReplay,
    #[error("record mode needs a cassette path")]
    NoCassettePath,
    #[error("scripted provider: {0}")]
    Scripted(String),
    #[error(transparent)]
    Cassette(#[from] CassetteError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Forge(#[from] ForgeError),
}

fn upstream(cfg: &Config) -> Result<Box<dyn ChatProvider>, SessionError> {
    if let Some(path) = &cfg.llm.scripted {
        return Ok(Box::new(ScriptedProvider::load(path).map_err(SessionError::Scripted)?));
    }
    let http = HttpProvider::from_env(&cfg.llm.api_base, Duration::from_secs(cfg.llm.request_timeout_secs));
    Ok(Box::new(Retrying::new(
        http,
        cfg.llm.retry_budget,
        Duration::from_secs_f64(cfg.llm.backoff_base_secs),
    )))
}

/// Replay never reaches a live endpoint: it serves the cassette, or the
/// scripted rules when no cassette is configured.
pub fn provider(cfg: &Config) -> Result<Arc<dyn ChatProvider>, SessionError> {
    let cassette = cfg.llm.cassette.as_deref();
    match cfg.llm.cassette_mode {
        CassetteMode::Replay => match (cassette, &cfg.llm.scripted) {
            (Some(path), _) => Ok(Arc::new(Cassette::open(CassetteMode::Replay, Some(path), None)?)),
            (None, Some(_)) => Ok(Arc::from(upstream(cfg)?)),
            (None, None) => Err(SessionError::NothingToReplay),
        },
        CassetteMode::Record => {
            let path = cassette.ok_or(SessionError::NoCassettePath)?;
            Ok(Arc::new(Cassette::open(
                CassetteMode::Record,
                Some(path),
                Some(upstream(cfg)?),
            )?))
        }
        CassetteMode::Live => Ok(Arc::new(Cassette::open(
            CassetteMode::Live,
            cassette,
            Some(upstream(cfg)?),
        )?)),
    }
}

pub fn gateway(cfg: &Config) -> Result<Gateway, SessionError> {
    Ok(Gateway::new(
        provider(cfg)?,
        cfg.llm.model.clone(),
        cfg.llm.requests_per_minute,
    ))
}

pub fn runtime(cfg: &Config) -> Result<Box<dyn Runtime>, SessionError> {
    Ok(match cfg.sandbox.runtime {
        RuntimeKind::Local => Box::new(LocalRuntime::new(cfg.sandbox.local_root.as_deref())?),
        RuntimeKind::Docker => Box::new(DockerRuntime::connect(&cfg.sandbox.docker_socket)?),
    })
}

pub fn forge(fixture: Option<&PathBuf>) -> Result<Box<dyn Forge>, SessionError> {
    Ok(match fixture {
        Some(dir) => Box::new(FixtureForge::load(dir)?),
        None => Box::new(GithubForge::from_env()),
    })
}

pub fn fetcher() -> Box<dyn PageFetcher> {
    Box::new(HttpFetcher::new(PAGE_TIMEOUT))
}
