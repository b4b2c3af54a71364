//! Validation phase and the reference command database.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use benchgen_core::answer::parse_labeled;
use benchgen_core::prompt::PromptId;
use benchgen_core::reference::{lookup_reference, ReferenceEntry, ReferenceStore, STORE_VERSION};
use benchgen_core::report::{detect_and_parse, ensure_granularity, raw_hash, ReportError, TestReport};
use benchgen_core::threshold::{accept, RejectionReason};
use benchgen_core::{CommandSet, Date, FrameworkId};
use serde::{Deserialize, Serialize};

use crate::improve::RepairIteration;
use crate::llm::gateway::{Gateway, GatewayError};
use crate::sandbox::{ExecOptions, ExecResult, Sandbox, SandboxError};

/// Lines of the final output shown to the success judge.
pub const JUDGE_TAIL_LINES: usize = 120;
pub const JUDGE_MAX_CHARS: usize = 8000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupOutcome {
    pub accepted: bool,
    pub cmds: CommandSet,
    pub parser: Option<FrameworkId>,
    pub report: Option<TestReport>,
    pub pass_rate: Option<f64>,
    pub rejection_reason: Option<RejectionReason>,
    #[serde(default)]
    pub detail: String,
    pub image: Option<String>,
    #[serde(default)]
    pub trail: Vec<RepairIteration>,
    #[serde(default)]
    pub from_reference: bool,
    #[serde(default)]
    pub test_seconds: f64,
}

impl SetupOutcome {
    pub fn rejected(cmds: CommandSet, reason: RejectionReason, detail: impl Into<String>) -> SetupOutcome {
        SetupOutcome {
            accepted: false,
            cmds,
            parser: None,
            report: None,
            pass_rate: None,
            rejection_reason: Some(reason),
            detail: detail.into(),
            image: None,
            trail: Vec::new(),
            from_reference: false,
            test_seconds: 0.0,
        }
    }
}

/// Last [`JUDGE_TAIL_LINES`] lines, trimmed from the front to
/// [`JUDGE_MAX_CHARS`] characters.
pub fn tail(output: &str) -> String {
    let lines: Vec<&str> = output.lines().collect();
    let start = lines.len().saturating_sub(JUDGE_TAIL_LINES);
    let text = lines[start..].join("\n");
    let chars = text.chars().count();
    if chars <= JUDGE_MAX_CHARS {
        return text;
    }
    text.chars().skip(chars - JUDGE_MAX_CHARS).collect()
}

/// Asks the model whether the run installed and tested the project; an
/// unparsable verdict counts as no.
pub fn judge_success(gateway: &Gateway, repo_id: &str, output: &str) -> Result<bool, GatewayError> {
    let context = tail(output);
    match gateway.ask_parsed(
        PromptId::ValidateSuccess,
        &[("repo_id", repo_id), ("context", &context)],
        |t| parse_labeled(t, "", &["YES", "NO"]),
    ) {
        Ok(v) => Ok(v == "YES"),
        Err(GatewayError::Unparsable { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Runs each test command and returns all results; a command that fails to
/// run at all does not stop the others.
pub fn run_test_commands(
    sandbox: &mut dyn Sandbox,
    test: &[String],
    opts: ExecOptions,
) -> Result<Vec<ExecResult>, SandboxError> {
    test.iter().map(|c| sandbox.exec(c, opts)).collect()
}

/// Parses each run and merges the reports. Runs that do not look like any
/// test runner are ignored as long as one run parses.
pub fn parse_runs(runs: &[ExecResult]) -> Result<TestReport, ReportError> {
    let mut merged: Option<TestReport> = None;
    let mut first_err = None;
    for run in runs {
        match detect_and_parse(&run.output) {
            Ok(r) => match merged.as_mut() {
                None => merged = Some(r),
                Some(m) => {
                    m.results.extend(r.results);
                    m.summary_counts.add(r.summary_counts);
                }
            },
            Err(ReportError::UnknownFramework) => {
                first_err.get_or_insert(ReportError::UnknownFramework);
            }
            Err(e) => return Err(e),
        }
    }
    let mut report = merged.ok_or_else(|| first_err.unwrap_or(ReportError::UnknownFramework))?;
    if runs.len() > 1 {
        let all: String = runs.iter().map(|r| r.output.as_str()).collect();
        report.raw_hash = raw_hash(&all);
    }
    Ok(report)
}

pub struct Validator<'a> {
    pub gateway: &'a Gateway,
    pub min_pass_rate: f64,
    pub test_opts: ExecOptions,
}

impl Validator<'_> {
    /// Judges the transcript, re-runs the tests with per-test output, and
    /// applies the pass-rate threshold. Test commands of the outcome are the
    /// rewritten ones.
    pub fn validate(
        &self,
        sandbox: &mut dyn Sandbox,
        repo_id: &str,
        cmds: &CommandSet,
        output: &str,
    ) -> Result<SetupOutcome, ValidationError> {
        let mut cmds = cmds.clone();
        if !judge_success(self.gateway, repo_id, output)? {
            return Ok(SetupOutcome::rejected(
                cmds,
                RejectionReason::LlmJudgedFailure,
                "judged unsuccessful",
            ));
        }
        cmds.test = ensure_granularity(&cmds.test);
        let runs = run_test_commands(sandbox, &cmds.test, self.test_opts)?;
        let seconds = runs.iter().map(|r| r.duration_secs).sum();
        let report = match parse_runs(&runs) {
            Ok(r) => r,
            Err(e) => {
                let mut out = SetupOutcome::rejected(cmds, RejectionReason::ParseFailure, e.to_string());
                out.test_seconds = seconds;
                return Ok(out);
            }
        };
        let verdict = accept(true, Some(&report.summary_counts), self.min_pass_rate);
        Ok(SetupOutcome {
            accepted: verdict.is_ok(),
            parser: Some(report.framework),
            pass_rate: report.pass_rate(),
            rejection_reason: verdict.err(),
            detail: format!(
                "{} passed, {} failed, {} errors, {} skipped",
                report.summary_counts.passed,
                report.summary_counts.failed,
                report.summary_counts.errored,
                report.summary_counts.skipped
            ),
            report: Some(report),
            cmds,
            image: None,
            trail: Vec::new(),
            from_reference: false,
            test_seconds: seconds,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("reference store {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("reference store {path} has version {found}, expected {STORE_VERSION}")]
    Version { path: PathBuf, found: u32 },
}

/// File-backed reference store. Writes go through one lock and replace the
/// file atomically.
pub struct ReferenceDb {
    path: Option<PathBuf>,
    store: Mutex<ReferenceStore>,
}

impl ReferenceDb {
    pub fn in_memory() -> ReferenceDb {
        ReferenceDb {
            path: None,
            store: Mutex::new(ReferenceStore::default()),
        }
    }

    pub fn open(path: &Path) -> Result<ReferenceDb, StoreError> {
        let store = if path.exists() {
            read_store(path)?
        } else {
            ReferenceStore::default()
        };
        Ok(ReferenceDb {
            path: Some(path.to_path_buf()),
            store: Mutex::new(store),
        })
    }

    pub fn snapshot(&self) -> ReferenceStore {
        self.store.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn lookup(&self, repo: &str, commit_date: Date, cutoff: Date) -> Option<(CommandSet, FrameworkId)> {
        lookup_reference(
            &self.store.lock().unwrap_or_else(|e| e.into_inner()),
            repo,
            commit_date,
            cutoff,
        )
    }

    /// Adds an accepted environment and persists the store.
    pub fn record(&self, repo: &str, entry: ReferenceEntry) -> Result<bool, StoreError> {
        let mut store = self.store.lock().unwrap_or_else(|e| e.into_inner());
        let added = store.insert(repo, entry);
        if added {
            if let Some(path) = &self.path {
                write_store(path, &store)?;
            }
        }
        Ok(added)
    }
}

pub fn read_store(path: &Path) -> Result<ReferenceStore, StoreError> {
    let io = |message: String| StoreError::Io {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    let mut store: ReferenceStore = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
    if store.version != STORE_VERSION {
        return Err(StoreError::Version {
            path: path.to_path_buf(),
            found: store.version,
        });
    }
    store.normalize();
    Ok(store)
}

pub fn write_store(path: &Path, store: &ReferenceStore) -> Result<(), StoreError> {
    let io = |message: String| StoreError::Io {
        path: path.to_path_buf(),
        message,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io(e.to_string()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(e.to_string()))?;
    let text = serde_json::to_string_pretty(store).map_err(|e| io(e.to_string()))?;
    tmp.write_all(text.as_bytes()).map_err(|e| io(e.to_string()))?;
    tmp.write_all(b"\n").map_err(|e| io(e.to_string()))?;
    tmp.persist(path).map_err(|e| io(e.to_string()))?;
    Ok(())
}
