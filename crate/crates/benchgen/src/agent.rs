//! The setup agent: extraction, iterative improvement, and validation for
//! one repository snapshot.

use std::path::PathBuf;

use benchgen_core::reference::ReferenceEntry;
use benchgen_core::threshold::RejectionReason;
use benchgen_core::{CommandSet, Date};

use crate::config::Config;
use crate::extraction::{ExtractionError, ExtractionSettings, Extractor};
use crate::fetch::PageFetcher;
use crate::improve::{AttemptOutcome, ImproveError, Improver};
use crate::llm::gateway::{Gateway, GatewayError};
use crate::repo::{GitError, Mirror};
use crate::sandbox::{image_tag, ExecOptions, Runtime, SandboxError, SandboxSpec};
use crate::validation::{ReferenceDb, SetupOutcome, StoreError, ValidationError, Validator};

#[derive(Debug, Clone)]
pub struct AgentSettings {
    pub extraction: ExtractionSettings,
    pub spec: SandboxSpec,
    pub registry: String,
    pub network_during_tests: bool,
    pub max_iterations: usize,
    pub min_pass_rate: f64,
    /// Directory receiving one repair trail file per attempt.
    pub trail_dir: Option<PathBuf>,
}

impl AgentSettings {
    pub fn from_config(cfg: &Config) -> AgentSettings {
        AgentSettings {
            extraction: ExtractionSettings {
                browsing: cfg.browsing.enabled,
                max_pages: cfg.browsing.max_pages,
                token_budget: cfg.context.token_budget,
                sources: cfg.context.sources,
            },
            spec: SandboxSpec {
                base_image: cfg.sandbox.base_image.clone(),
                python_version: String::new(),
                cpu_limit: cfg.sandbox.cpu_limit,
                mem_limit_mb: cfg.sandbox.mem_limit_mb,
                install_timeout: std::time::Duration::from_secs(cfg.sandbox.install_timeout_secs),
                test_timeout: std::time::Duration::from_secs(cfg.sandbox.test_timeout_secs),
            },
            registry: cfg.sandbox.registry.clone(),
            network_during_tests: cfg.sandbox.network_during_tests,
            max_iterations: cfg.build.max_iterations,
            min_pass_rate: cfg.build.min_pass_rate,
            trail_dir: None,
        }
    }

    pub fn test_opts(&self) -> ExecOptions {
        ExecOptions {
            timeout: self.spec.test_timeout,
            network: self.network_during_tests,
        }
    }
}

/// Failures that say nothing about the repository itself.
#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Git(#[from] GitError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl From<ImproveError> for AgentError {
    fn from(e: ImproveError) -> Self {
        match e {
            ImproveError::Sandbox(e) => AgentError::Sandbox(e),
            ImproveError::Gateway(e) => AgentError::Gateway(e),
        }
    }
}

impl From<ValidationError> for AgentError {
    fn from(e: ValidationError) -> Self {
        match e {
            ValidationError::Sandbox(e) => AgentError::Sandbox(e),
            ValidationError::Gateway(e) => AgentError::Gateway(e),
        }
    }
}

pub struct Agent<'a> {
    pub gateway: &'a Gateway,
    pub fetcher: &'a dyn PageFetcher,
    pub runtime: &'a dyn Runtime,
    pub references: &'a ReferenceDb,
    pub settings: AgentSettings,
}

fn placeholder_cmds(cutoff: Date) -> CommandSet {
    CommandSet {
        python_version: String::new(),
        install: Vec::new(),
        test: Vec::new(),
        cutoff_date: cutoff,
    }
}

impl Agent<'_> {
    /// Sets up `commit` of `repo_id` with dependencies pinned to `cutoff`.
    /// Accepted environments are snapshotted and added to the reference
    /// store.
    pub fn setup(
        &self,
        mirror: &Mirror,
        repo_id: &str,
        commit: &str,
        cutoff: Date,
    ) -> Result<SetupOutcome, AgentError> {
        let commit = mirror
            .resolve(commit)
            .map_err(|e| SandboxError::CloneError(e.to_string()))?;
        let commit_date = mirror.commit_date(&commit)?;
        let reference = self.references.lookup(repo_id, commit_date, cutoff).map(|(c, _)| c);
        let extractor = Extractor {
            gateway: self.gateway,
            fetcher: self.fetcher,
            settings: self.settings.extraction.clone(),
        };
        let extraction = match extractor.extract(mirror, &commit, repo_id, cutoff, reference) {
            Ok(x) => x,
            Err(ExtractionError::NoCommandsExtracted) => {
                return Ok(SetupOutcome::rejected(
                    placeholder_cmds(cutoff),
                    RejectionReason::NoCommands,
                    "no commands extracted",
                ));
            }
            Err(ExtractionError::Python(e)) => {
                return Ok(SetupOutcome::rejected(
                    placeholder_cmds(cutoff),
                    RejectionReason::EnvironmentError,
                    e.to_string(),
                ));
            }
            Err(ExtractionError::Gateway(e)) => return Err(e.into()),
            Err(ExtractionError::Git(e)) => return Err(e.into()),
        };
        tracing::info!(
            repo = repo_id,
            commit = %commit,
            python = %extraction.cmds.python_version,
            from_reference = extraction.from_reference,
            "extracted commands"
        );
        let trail_path = self.settings.trail_dir.as_ref().map(|d| {
            let _ = std::fs::create_dir_all(d);
            d.join(format!(
                "{}-{}.trail.jsonl",
                repo_id.replace('/', "__"),
                &commit[..12.min(commit.len())]
            ))
        });
        if let Some(p) = &trail_path {
            let _ = std::fs::remove_file(p);
        }
        let improver = Improver {
            gateway: self.gateway,
            runtime: self.runtime,
            spec: self.settings.spec.clone(),
            network_during_tests: self.settings.network_during_tests,
            max_iterations: self.settings.max_iterations,
            trail_path,
        };
        let attempt = improver.improve(&mirror.source(), &commit, repo_id, extraction.cmds)?;
        let (output, test_seconds, mut sandbox) = match attempt.outcome {
            AttemptOutcome::Success {
                output,
                test_seconds,
                sandbox,
            } => (output, test_seconds, sandbox),
            AttemptOutcome::Rejected { reason, detail } => {
                let mut out = SetupOutcome::rejected(attempt.cmds, reason, detail);
                out.trail = attempt.trail;
                out.from_reference = extraction.from_reference;
                return Ok(out);
            }
        };
        let validator = Validator {
            gateway: self.gateway,
            min_pass_rate: self.settings.min_pass_rate,
            test_opts: self.settings.test_opts(),
        };
        let mut outcome = validator.validate(sandbox.as_mut(), repo_id, &attempt.cmds, &output)?;
        outcome.trail = attempt.trail;
        outcome.from_reference = extraction.from_reference;
        if outcome.test_seconds == 0.0 {
            outcome.test_seconds = test_seconds;
        }
        if outcome.accepted {
            let image = sandbox.snapshot(&image_tag(&self.settings.registry, repo_id, &commit))?;
            outcome.image = Some(image);
            if let Some(parser) = outcome.parser {
                self.references.record(
                    repo_id,
                    ReferenceEntry {
                        commit: commit.clone(),
                        commit_date,
                        cmds: outcome.cmds.clone(),
                        parser,
                    },
                )?;
            }
        }
        tracing::info!(
            repo = repo_id,
            commit = %commit,
            accepted = outcome.accepted,
            reason = ?outcome.rejection_reason,
            repairs = outcome.trail.len(),
            "setup finished"
        );
        Ok(outcome)
    }
}
