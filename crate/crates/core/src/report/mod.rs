//! Test-runner output parsing.
//!
//! Each supported runner has a parser that turns its textual output into a
//! per-test [`TestReport`], and a renderer producing the same textual format
//! from a report. Skipped, xfailed and xpassed tests are counted but kept out
//! of the results map; errors map to [`TestStatus::Fail`].

mod granularity;
mod pytest;
mod tox;
mod unittest;

use alloc::borrow::Cow;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::behavior::TestStatus;

pub use granularity::{ensure_granularity, ensure_granularity_one};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameworkId {
    Pytest,
    Unittest,
    Nose,
    ToxWrapped,
}

impl FrameworkId {
    pub const ALL: [FrameworkId; 4] = [
        FrameworkId::Pytest,
        FrameworkId::Unittest,
        FrameworkId::Nose,
        FrameworkId::ToxWrapped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FrameworkId::Pytest => "pytest",
            FrameworkId::Unittest => "unittest",
            FrameworkId::Nose => "nose",
            FrameworkId::ToxWrapped => "tox-wrapped",
        }
    }
}

impl fmt::Display for FrameworkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrameworkId {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FrameworkId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or(ReportError::UnknownFramework)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("output does not look like any supported test runner")]
    UnknownFramework,
    #[error("malformed report: {0}")]
    MalformedReport(String),
}

pub(crate) fn malformed(msg: impl Into<String>) -> ReportError {
    ReportError::MalformedReport(msg.into())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryCounts {
    pub passed: u64,
    pub failed: u64,
    pub errored: u64,
    pub skipped: u64,
}

impl SummaryCounts {
    pub fn add(&mut self, other: SummaryCounts) {
        self.passed += other.passed;
        self.failed += other.failed;
        self.errored += other.errored;
        self.skipped += other.skipped;
    }

    /// Tests with a pass/fail verdict; errors count as failures.
    pub fn judged(&self) -> u64 {
        self.passed + self.failed + self.errored
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestReport {
    pub framework: FrameworkId,
    pub results: BTreeMap<String, TestStatus>,
    pub summary_counts: SummaryCounts,
    pub raw_hash: String,
}

impl TestReport {
    /// `passed / (passed + failed + errored)`, or `None` with no judged tests.
    pub fn pass_rate(&self) -> Option<f64> {
        let judged = self.summary_counts.judged();
        (judged > 0).then(|| self.summary_counts.passed as f64 / judged as f64)
    }
}

/// Removes ANSI colour escape sequences.
pub fn strip_ansi(text: &str) -> Cow<'_, str> {
    if !text.contains('\x1b') {
        return Cow::Borrowed(text);
    }
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\x1b' && chars.peek() == Some(&'[') {
            chars.next();
            for d in chars.by_ref() {
                if d.is_ascii_alphabetic() {
                    break;
                }
            }
        } else {
            out.push(c);
        }
    }
    Cow::Owned(out)
}

pub fn raw_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Accumulates per-test lines, keeping one status per id.
#[derive(Debug, Default)]
pub(crate) struct Tally {
    pub results: BTreeMap<String, TestStatus>,
    seen: BTreeSet<(String, u8)>,
    pub passed: u64,
    pub failed: u64,
    pub errored: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Line {
    Passed,
    Failed,
    Errored,
}

impl Tally {
    pub fn record(&mut self, id: &str, line: Line) -> Result<(), ReportError> {
        if id.is_empty() {
            return Err(malformed("empty test id"));
        }
        let key = (String::from(id), line as u8);
        if !self.seen.insert(key) {
            return Ok(());
        }
        let opposite = match line {
            Line::Passed => Some(Line::Failed),
            Line::Failed => Some(Line::Passed),
            Line::Errored => None,
        };
        if let Some(o) = opposite {
            if self.seen.contains(&(String::from(id), o as u8)) {
                return Err(malformed(alloc::format!(
                    "test `{id}` reported as both passed and failed"
                )));
            }
        }
        match line {
            Line::Passed => self.passed += 1,
            Line::Failed => self.failed += 1,
            Line::Errored => self.errored += 1,
        }
        let status = if line == Line::Passed {
            TestStatus::Pass
        } else {
            TestStatus::Fail
        };
        let entry = self.results.entry(String::from(id)).or_insert(status);
        if status == TestStatus::Fail {
            *entry = TestStatus::Fail;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    /// Checks the detail lines against a summary, where one exists.
    pub fn check(&self, summary: &SummaryCounts) -> Result<(), ReportError> {
        if self.is_empty() {
            return Ok(());
        }
        if self.passed != summary.passed || self.failed != summary.failed {
            return Err(malformed(alloc::format!(
                "summary reports {} passed / {} failed but detail lines show {} / {}",
                summary.passed,
                summary.failed,
                self.passed,
                self.failed
            )));
        }
        Ok(())
    }
}

fn score(output: &str, framework: FrameworkId) -> u32 {
    match framework {
        FrameworkId::Pytest => pytest::score(output),
        FrameworkId::Unittest => unittest::score(output, false),
        FrameworkId::Nose => unittest::score(output, true),
        FrameworkId::ToxWrapped => tox::score(output),
    }
}

/// Picks the parser whose markers score highest. Ties go to the earlier
/// entry of pytest, unittest, nose, tox-wrapped.
pub fn detect(output: &str) -> Result<FrameworkId, ReportError> {
    let mut best: Option<(u32, FrameworkId)> = None;
    for f in FrameworkId::ALL {
        let s = score(output, f);
        if s > 0 && best.is_none_or(|(b, _)| s > b) {
            best = Some((s, f));
        }
    }
    best.map(|(_, f)| f).ok_or(ReportError::UnknownFramework)
}

pub fn parse(output: &str, framework: FrameworkId) -> Result<TestReport, ReportError> {
    let (results, summary_counts) = match framework {
        FrameworkId::Pytest => pytest::parse(output)?,
        FrameworkId::Unittest | FrameworkId::Nose => unittest::parse(output)?,
        FrameworkId::ToxWrapped => tox::parse(output)?,
    };
    Ok(TestReport {
        framework,
        results,
        summary_counts,
        raw_hash: raw_hash(output),
    })
}

pub fn detect_and_parse(output: &str) -> Result<TestReport, ReportError> {
    parse(output, detect(output)?)
}

/// Renders a report in its framework's textual format. Failed ids are split
/// between failure and error lines according to the summary counts.
pub fn render(report: &TestReport) -> String {
    match report.framework {
        FrameworkId::Pytest => pytest::render(report),
        FrameworkId::Unittest => unittest::render(report, false),
        FrameworkId::Nose => unittest::render(report, true),
        FrameworkId::ToxWrapped => tox::render(report),
    }
}

pub(crate) fn split_failed(report: &TestReport) -> (alloc::vec::Vec<&str>, alloc::vec::Vec<&str>) {
    let failed: alloc::vec::Vec<&str> = report
        .results
        .iter()
        .filter(|(_, s)| **s == TestStatus::Fail)
        .map(|(k, _)| k.as_str())
        .collect();
    let n = (report.summary_counts.failed as usize).min(failed.len());
    (failed[..n].to_vec(), failed[n..].to_vec())
}
