//! Isolated execution of setup and test commands.
//!
//! A [`Runtime`] hands out single-owner [`Sandbox`] handles. Inside every
//! sandbox the repository lives at `/testbed` and the interpreter's virtual
//! environment at `/opt/venv`, whatever the backend stores physically.

pub mod docker;
pub mod http_unix;
pub mod local;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use docker::DockerRuntime;
pub use local::LocalRuntime;

pub const WORKDIR: &str = "/testbed";
pub const VENV: &str = "/opt/venv";
/// Exit code reported for commands killed by the timeout.
pub const TIMEOUT_EXIT: i32 = 124;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxSpec {
    pub base_image: String,
    pub python_version: String,
    pub cpu_limit: f64,
    pub mem_limit_mb: u64,
    pub install_timeout: Duration,
    pub test_timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub command: String,
    pub exit_code: i32,
    /// Interleaved stdout and stderr.
    pub output: String,
    pub duration_secs: f64,
    pub timed_out: bool,
}

impl ExecResult {
    pub fn success(&self) -> bool {
        self.exit_code == 0 && !self.timed_out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    pub timeout: Duration,
    pub network: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SandboxError {
    #[error("container runtime unavailable: {0}")]
    RuntimeUnavailable(String),
    #[error("cannot check out repository: {0}")]
    CloneError(String),
    #[error("python {0} is not available")]
    InterpreterUnavailable(String),
    #[error("sandbox is gone: {0}")]
    SandboxDead(String),
    #[error("patch does not apply: {0}")]
    PatchApply(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait Sandbox: Send {
    fn id(&self) -> &str;

    fn exec(&mut self, command: &str, opts: ExecOptions) -> Result<ExecResult, SandboxError>;

    /// Writes a file; relative paths are taken from `/testbed`.
    fn write_file(&mut self, path: &str, contents: &[u8]) -> Result<(), SandboxError>;

    /// Freezes the filesystem under `tag` and returns the image reference.
    fn snapshot(&mut self, tag: &str) -> Result<String, SandboxError>;
}

pub trait Runtime: Send + Sync {
    /// Fresh sandbox with `source` (a clone URL or local repository path)
    /// checked out at `commit` and the requested interpreter provisioned.
    fn create(&self, spec: &SandboxSpec, source: &str, commit: &str) -> Result<Box<dyn Sandbox>, SandboxError>;

    fn restore(&self, image: &str, spec: &SandboxSpec) -> Result<Box<dyn Sandbox>, SandboxError>;

    fn image_exists(&self, image: &str) -> bool;
}

/// `<registry>/<org>/setupagent-<repo-slug>:<commit12>`
pub fn image_tag(registry: &str, repo: &str, commit: &str) -> String {
    let (org, name) = repo.split_once('/').unwrap_or(("local", repo));
    let slug = |s: &str| -> String {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                    c.to_ascii_lowercase()
                } else {
                    '-'
                }
            })
            .collect()
    };
    let short: String = commit.chars().take(12).collect();
    format!(
        "{}/{}/setupagent-{}:{}",
        registry.trim_end_matches('/'),
        slug(org),
        slug(name),
        short
    )
}

/// Applies a unified diff inside the sandbox with `git apply`. Empty patches
/// are a no-op.
pub fn apply_patch(sandbox: &mut dyn Sandbox, patch: &str, name: &str) -> Result<(), SandboxError> {
    if patch.trim().is_empty() {
        return Ok(());
    }
    let path = format!("/tmp/{name}.diff");
    sandbox.write_file(&path, patch.as_bytes())?;
    let res = sandbox.exec(
        &format!("git apply --whitespace=nowarn {path}"),
        ExecOptions {
            timeout: Duration::from_secs(120),
            network: false,
        },
    )?;
    if res.success() {
        Ok(())
    } else {
        Err(SandboxError::PatchApply(res.output.trim().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_scheme() {
        assert_eq!(
            image_tag("localhost", "Toy/Calc", "0123456789abcdef0123"),
            "localhost/toy/setupagent-calc:0123456789ab"
        );
    }
}
