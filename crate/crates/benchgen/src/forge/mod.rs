//! Source-forge access: repository metadata, pull-request listings, and
//! full pull-request records with their linked issues.

pub mod fixture;
pub mod github;

use benchgen_core::dataset::PullRecord;
use serde::{Deserialize, Serialize};

pub use fixture::FixtureForge;
pub use github::GithubForge;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoMeta {
    /// Canonical `org/name`.
    pub full_name: String,
    /// Anything `git clone` accepts: a URL or a local path.
    pub clone_url: String,
    pub license: Option<String>,
    pub stars: Option<u64>,
    pub created_at: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullSummary {
    pub number: u64,
    pub merged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("rate limit exhausted: {0}")]
    RateLimited(String),
    #[error("forge request failed: {0}")]
    Http(String),
    #[error("unexpected forge data: {0}")]
    Invalid(String),
}

pub trait Forge: Send + Sync {
    fn repo(&self, repo: &str) -> Result<RepoMeta, ForgeError>;

    /// One page (1-based) of closed pull requests, newest first.
    fn list_pulls(&self, repo: &str, page: u32, per_page: u32) -> Result<Vec<PullSummary>, ForgeError>;

    fn pull_record(&self, repo: &str, number: u64) -> Result<PullRecord, ForgeError>;
}

/// `org/name` from a list entry such as `Org/Name`,
/// `https://github.com/org/name.git`, or `git@github.com:org/name`.
pub fn canonical_repo(entry: &str) -> Option<String> {
    let e = entry.trim();
    if e.is_empty() || e.starts_with('#') {
        return None;
    }
    let e = e.strip_suffix('/').unwrap_or(e);
    let e = e.strip_suffix(".git").unwrap_or(e);
    let path = if let Some((_, rest)) = e.split_once("://") {
        rest.split_once('/').map_or("", |(_, p)| p)
    } else if let Some((_, rest)) = e.split_once(':').filter(|(h, _)| h.contains('@')) {
        rest
    } else {
        e
    };
    let mut parts = path.split('/').filter(|p| !p.is_empty());
    let (org, name) = (parts.next()?, parts.next()?);
    if parts.next().is_some() {
        return None;
    }
    Some(format!("{}/{}", org.to_ascii_lowercase(), name.to_ascii_lowercase()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms() {
        for e in [
            "toy/calc",
            "Toy/Calc",
            "https://github.com/toy/calc.git",
            "git@github.com:toy/calc",
            "https://github.com/Toy/calc/",
        ] {
            assert_eq!(canonical_repo(e).as_deref(), Some("toy/calc"), "{e}");
        }
        assert_eq!(canonical_repo("# comment"), None);
        assert_eq!(canonical_repo("just-a-name"), None);
        assert_eq!(canonical_repo("a/b/c"), None);
    }
}
