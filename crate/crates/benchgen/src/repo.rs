//! Host-side bare mirror of a repository, used to inspect snapshots without
//! a sandbox and as the clone source for sandboxes.

use std::path::{Path, PathBuf};
use std::process::Command;

use benchgen_core::dataset::CodebaseSize;
use benchgen_core::Date;

#[derive(Debug, thiserror::Error)]
#[error("git {args}: {message}")]
pub struct GitError {
    pub args: String,
    pub message: String,
}

pub struct Mirror {
    path: PathBuf,
    _dir: Option<tempfile::TempDir>,
}

fn run_git(dir: &Path, args: &[&str]) -> Result<Vec<u8>, GitError> {
    let err = |message: String| GitError {
        args: args.join(" "),
        message,
    };
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(args)
        .env("GIT_TERMINAL_PROMPT", "0")
        .output()
        .map_err(|e| err(e.to_string()))?;
    if !out.status.success() {
        return Err(err(String::from_utf8_lossy(&out.stderr).trim().to_string()));
    }
    Ok(out.stdout)
}

impl Mirror {
    /// Mirrors `source` (a URL or local path) into a private temporary
    /// directory.
    pub fn clone_from(source: &str) -> Result<Mirror, GitError> {
        let dir = tempfile::Builder::new()
            .prefix("benchgen-mirror-")
            .tempdir()
            .map_err(|e| GitError {
                args: "clone".into(),
                message: e.to_string(),
            })?;
        let path = dir.path().join("repo.git");
        let parent = dir.path().to_path_buf();
        run_git(
            &parent,
            &[
                "clone",
                "--quiet",
                "--mirror",
                source,
                path.to_str().unwrap_or("repo.git"),
            ],
        )?;
        Ok(Mirror { path, _dir: Some(dir) })
    }

    /// Uses an existing repository in place.
    pub fn open(path: &Path) -> Mirror {
        Mirror {
            path: path.to_path_buf(),
            _dir: None,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn source(&self) -> String {
        self.path.to_string_lossy().into_owned()
    }

    /// Full commit id of a revision, or an error if it does not exist.
    pub fn resolve(&self, rev: &str) -> Result<String, GitError> {
        let out = run_git(
            &self.path,
            &["rev-parse", "--verify", "--quiet", &format!("{rev}^{{commit}}")],
        )?;
        Ok(String::from_utf8_lossy(&out).trim().to_string())
    }

    pub fn ls_tree(&self, commit: &str) -> Result<Vec<String>, GitError> {
        let out = run_git(&self.path, &["ls-tree", "-r", "-z", "--name-only", commit])?;
        Ok(out
            .split(|b| *b == 0)
            .filter(|p| !p.is_empty())
            .map(|p| String::from_utf8_lossy(p).into_owned())
            .collect())
    }

    /// File content at `commit`, `None` if absent or not valid UTF-8.
    pub fn show(&self, commit: &str, path: &str) -> Option<String> {
        let out = run_git(&self.path, &["show", &format!("{commit}:{path}")]).ok()?;
        String::from_utf8(out).ok()
    }

    pub fn commit_date(&self, commit: &str) -> Result<Date, GitError> {
        let out = run_git(&self.path, &["show", "-s", "--format=%cI", commit])?;
        let text = String::from_utf8_lossy(&out);
        Date::parse_prefix(text.trim()).map_err(|_| GitError {
            args: "show".into(),
            message: format!("unparsable commit date {text:?}"),
        })
    }

    /// Newest commit on the default branch committed on or before `date`.
    pub fn commit_before(&self, date: Date) -> Result<String, GitError> {
        let out = run_git(
            &self.path,
            &["rev-list", "-n1", &format!("--before={date}T23:59:59Z"), "HEAD"],
        )?;
        let id = String::from_utf8_lossy(&out).trim().to_string();
        if id.is_empty() {
            return Err(GitError {
                args: "rev-list".into(),
                message: format!("no commit on or before {date}"),
            });
        }
        Ok(id)
    }

    /// Python files and their total line count at `commit`.
    pub fn codebase_size(&self, commit: &str) -> Result<CodebaseSize, GitError> {
        let files = self.ls_tree(commit)?.iter().filter(|p| p.ends_with(".py")).count() as u64;
        let lines = match run_git(&self.path, &["grep", "-c", "", commit, "--", "*.py"]) {
            Ok(out) => String::from_utf8_lossy(&out)
                .lines()
                .filter_map(|l| l.rsplit(':').next()?.parse::<u64>().ok())
                .sum(),
            Err(_) => 0,
        };
        Ok(CodebaseSize { files, lines })
    }
}
