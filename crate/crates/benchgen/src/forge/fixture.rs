//! Offline forge backed by a directory of repository trees and pull-request
//! diffs, materialized into real git repositories with fixed dates.
//!
//! Layout: `forge.json` plus one directory per repository holding `tree/`
//! (the initial snapshot) and the diff files named by its pulls.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use benchgen_core::dataset::{closing_references, IssueRef, PullRecord};
use benchgen_core::diff;
use serde::Deserialize;

use super::{canonical_repo, Forge, ForgeError, PullSummary, RepoMeta};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureIssue {
    pub number: u64,
    pub title: String,
    #[serde(default)]
    pub body: String,
    pub created_at: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixturePull {
    pub number: u64,
    pub title: String,
    #[serde(default)]
    pub body: String,
    pub diff: String,
    pub created_at: String,
    #[serde(default)]
    pub merged_at: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRepo {
    pub name: String,
    pub dir: String,
    #[serde(default)]
    pub license: Option<String>,
    #[serde(default)]
    pub stars: Option<u64>,
    #[serde(default)]
    pub created_at: Option<String>,
    /// Date of the initial commit.
    pub initial_date: String,
    #[serde(default)]
    pub issues: Vec<FixtureIssue>,
    #[serde(default)]
    pub pulls: Vec<FixturePull>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    repos: Vec<FixtureRepo>,
}

struct Materialized {
    path: PathBuf,
    /// Pull number → (base commit, full diff).
    bases: HashMap<u64, (String, String)>,
}

pub struct FixtureForge {
    root: PathBuf,
    repos: Vec<FixtureRepo>,
    work: tempfile::TempDir,
    built: Mutex<HashMap<String, Materialized>>,
}

fn git(dir: &Path, args: &[&str], date: &str) -> Result<String, ForgeError> {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args([
            "-c",
            "user.name=Fixture Author",
            "-c",
            "user.email=fixture@example.org",
            "-c",
            "commit.gpgsign=false",
        ])
        .args(args)
        .env("GIT_AUTHOR_DATE", date)
        .env("GIT_COMMITTER_DATE", date)
        .output()
        .map_err(|e| ForgeError::Http(format!("git: {e}")))?;
    if !out.status.success() {
        return Err(ForgeError::Invalid(format!(
            "git {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
}

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    for entry in walkdir::WalkDir::new(from) {
        let entry = entry.map_err(std::io::Error::other)?;
        let rel = entry.path().strip_prefix(from).map_err(std::io::Error::other)?;
        let target = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target)?;
        } else {
            std::fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}

impl FixtureForge {
    pub fn load(root: &Path) -> Result<FixtureForge, ForgeError> {
        let path = root.join("forge.json");
        let text =
            std::fs::read_to_string(&path).map_err(|e| ForgeError::Invalid(format!("{}: {e}", path.display())))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| ForgeError::Invalid(format!("{}: {e}", path.display())))?;
        let work = tempfile::Builder::new()
            .prefix("benchgen-forge-")
            .tempdir()
            .map_err(|e| ForgeError::Http(e.to_string()))?;
        Ok(FixtureForge {
            root: root.to_path_buf(),
            repos: manifest.repos,
            work,
            built: Mutex::new(HashMap::new()),
        })
    }

    fn find(&self, repo: &str) -> Result<&FixtureRepo, ForgeError> {
        let key = canonical_repo(repo).ok_or_else(|| ForgeError::NotFound(repo.to_string()))?;
        self.repos
            .iter()
            .find(|r| canonical_repo(&r.name).as_deref() == Some(key.as_str()))
            .ok_or_else(|| ForgeError::NotFound(repo.to_string()))
    }

    fn diff_text(&self, repo: &FixtureRepo, pull: &FixturePull) -> Result<String, ForgeError> {
        let p = self.root.join(&repo.dir).join(&pull.diff);
        std::fs::read_to_string(&p).map_err(|e| ForgeError::Invalid(format!("{}: {e}", p.display())))
    }

    /// Commits the tree, then every merged pull in number order; unmerged
    /// pulls are recorded against the head they were opened on.
    fn materialize(&self, repo: &FixtureRepo) -> Result<(), ForgeError> {
        let mut built = self.built.lock().unwrap_or_else(|e| e.into_inner());
        if built.contains_key(&repo.name) {
            return Ok(());
        }
        let path = self.work.path().join(repo.name.replace('/', "__"));
        let io = |e: std::io::Error| ForgeError::Invalid(e.to_string());
        std::fs::create_dir_all(&path).map_err(io)?;
        git(&path, &["init", "-q", "-b", "main"], &repo.initial_date)?;
        copy_dir(&self.root.join(&repo.dir).join("tree"), &path).map_err(io)?;
        git(&path, &["add", "-A"], &repo.initial_date)?;
        git(&path, &["commit", "-q", "-m", "Initial commit"], &repo.initial_date)?;
        let mut pulls: Vec<&FixturePull> = repo.pulls.iter().collect();
        pulls.sort_by_key(|p| p.number);
        let mut bases = HashMap::new();
        for pull in pulls {
            let head = git(&path, &["rev-parse", "HEAD"], &repo.initial_date)?;
            let text = self.diff_text(repo, pull)?;
            if let Some(date) = &pull.merged_at {
                let patch = path.join(".fixture.diff");
                std::fs::write(&patch, &text).map_err(io)?;
                git(&path, &["apply", "--index", ".fixture.diff"], date)?;
                std::fs::remove_file(&patch).map_err(io)?;
                git(
                    &path,
                    &["commit", "-q", "-m", &format!("{} (#{})", pull.title, pull.number)],
                    date,
                )?;
            }
            bases.insert(pull.number, (head, text));
        }
        built.insert(repo.name.clone(), Materialized { path, bases });
        Ok(())
    }
}

impl Forge for FixtureForge {
    fn repo(&self, repo: &str) -> Result<RepoMeta, ForgeError> {
        let r = self.find(repo)?;
        self.materialize(r)?;
        let built = self.built.lock().unwrap_or_else(|e| e.into_inner());
        Ok(RepoMeta {
            full_name: canonical_repo(&r.name).unwrap_or_else(|| r.name.clone()),
            clone_url: built[&r.name].path.to_string_lossy().into_owned(),
            license: r.license.clone(),
            stars: r.stars,
            created_at: r.created_at.clone(),
        })
    }

    fn list_pulls(&self, repo: &str, page: u32, per_page: u32) -> Result<Vec<PullSummary>, ForgeError> {
        let r = self.find(repo)?;
        let mut pulls: Vec<PullSummary> = r
            .pulls
            .iter()
            .map(|p| PullSummary {
                number: p.number,
                merged: p.merged_at.is_some(),
            })
            .collect();
        pulls.sort_by_key(|p| std::cmp::Reverse(p.number));
        let start = (page.max(1) as usize - 1) * per_page as usize;
        Ok(pulls.into_iter().skip(start).take(per_page as usize).collect())
    }

    fn pull_record(&self, repo: &str, number: u64) -> Result<PullRecord, ForgeError> {
        let r = self.find(repo)?;
        let pull = r
            .pulls
            .iter()
            .find(|p| p.number == number)
            .ok_or_else(|| ForgeError::NotFound(format!("{repo}#{number}")))?;
        self.materialize(r)?;
        let (base, text) = self.built.lock().unwrap_or_else(|e| e.into_inner())[&r.name].bases[&number].clone();
        let parsed = diff::parse(&text).map_err(|e| ForgeError::Invalid(format!("{repo}#{number}: {e}")))?;
        let full = canonical_repo(&r.name).unwrap_or_else(|| r.name.clone());
        let refs = closing_references(&format!("{}\n{}", pull.title, pull.body), &full);
        let linked_issue = refs
            .iter()
            .find_map(|n| r.issues.iter().find(|i| i.number == *n))
            .map(|i| IssueRef {
                number: i.number,
                title: i.title.clone(),
                body: i.body.clone(),
                created_at: i.created_at.clone(),
            });
        Ok(PullRecord {
            repo: full,
            number,
            merged: pull.merged_at.is_some(),
            merged_at: pull.merged_at.clone(),
            created_at: pull.created_at.clone(),
            linked_issue,
            files_changed: parsed.files.iter().map(|f| f.path().to_string()).collect(),
            diff: text,
            base_commit: base,
            license: r.license.clone(),
        })
    }
}
