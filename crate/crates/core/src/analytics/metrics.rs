//! Per-instance characteristics of issue texts and fixes.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::lcs::{longest_common_substring, normalize_whitespace};
use crate::behavior::{classify, BehaviorMap};
use crate::diff::{self, DiffError};

/// Minimum non-space characters for a fix line to count as quoted.
pub const FIX_LINE_MIN_CHARS: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueMetrics {
    pub words: u64,
    pub code_blocks: u64,
    pub error_messages: u64,
    pub fix_file_names_in_issue: u64,
    pub longest_fix_substring: u64,
    pub fix_lines_in_issue: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixComplexity {
    pub edited_files: u64,
    pub edited_lines: u64,
    pub affected_tests: u64,
}

fn is_fence(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}

/// `SomeError: msg`, `pkg.mod.SomeException`, and similar terminal lines.
fn is_exception_line(line: &str) -> bool {
    let t = line.trim();
    let head = t.split(':').next().unwrap_or("");
    if head.is_empty() || head.len() == t.len() && t.contains(' ') {
        return false;
    }
    let valid = head
        .split('.')
        .all(|p| !p.is_empty() && p.chars().all(|c| c.is_alphanumeric() || c == '_'));
    valid && (head.ends_with("Error") || head.ends_with("Exception"))
}

/// Traceback headers plus terminal exception lines, each distinct message
/// counted once per fenced block (the prose between fences is a block too).
/// A traceback and the exception line ending it are one message.
pub fn count_error_messages(text: &str) -> u64 {
    let mut total = 0u64;
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut in_traceback = false;
    for line in text.lines() {
        if is_fence(line) {
            seen.clear();
            in_traceback = false;
            continue;
        }
        let t = line.trim();
        if t.starts_with("Traceback (most recent call last)") {
            in_traceback = true;
            continue;
        }
        if is_exception_line(t) {
            if seen.insert(String::from(t)) {
                total += 1;
            }
            in_traceback = false;
            continue;
        }
        if in_traceback && t.is_empty() {
            // A traceback without a recognizable terminal line still counts.
            if seen.insert(String::from("Traceback")) {
                total += 1;
            }
            in_traceback = false;
        }
    }
    if in_traceback && seen.insert(String::from("Traceback")) {
        total += 1;
    }
    total
}

fn changed_lines(patch: &diff::Diff) -> Vec<&str> {
    patch
        .files
        .iter()
        .flat_map(|f| f.hunks.iter())
        .flat_map(|h| h.removed.iter().chain(h.added.iter()))
        .map(String::as_str)
        .collect()
}

/// Characteristics of an issue text relative to the fix patch. A patch that
/// does not parse contributes nothing to the fix-overlap fields.
pub fn issue_metrics(issue: &str, fix_patch: &str) -> IssueMetrics {
    let fences = issue.lines().filter(|l| is_fence(l)).count() as u64;
    let mut m = IssueMetrics {
        words: issue.split_whitespace().count() as u64,
        code_blocks: fences.div_ceil(2),
        error_messages: count_error_messages(issue),
        ..IssueMetrics::default()
    };
    let Ok(patch) = diff::parse(fix_patch) else { return m };

    let mut paths: Vec<&str> = patch.files.iter().map(diff::FilePatch::path).collect();
    paths.sort_unstable();
    paths.dedup();
    m.fix_file_names_in_issue = paths
        .iter()
        .filter(|p| {
            let base = p.rsplit('/').next().unwrap_or(p);
            issue.contains(*p) || (!base.is_empty() && issue.contains(base))
        })
        .count() as u64;

    let changed = changed_lines(&patch);
    let fix_text = normalize_whitespace(&changed.join("\n"));
    m.longest_fix_substring = longest_common_substring(&normalize_whitespace(issue), &fix_text) as u64;

    let issue_lines: BTreeSet<&str> = issue.lines().map(str::trim).collect();
    let quoted: BTreeSet<&str> = changed
        .iter()
        .map(|l| l.trim())
        .filter(|l| l.chars().filter(|c| !c.is_whitespace()).count() >= FIX_LINE_MIN_CHARS)
        .filter(|l| issue_lines.contains(l))
        .collect();
    m.fix_lines_in_issue = quoted.len() as u64;
    m
}

pub fn fix_complexity(code_patch: &str, behaviors: &BehaviorMap) -> Result<FixComplexity, DiffError> {
    let s = diff::stats(code_patch)?;
    let c = classify(behaviors);
    Ok(FixComplexity {
        edited_files: s.files as u64,
        edited_lines: s.edited_lines() as u64,
        affected_tests: (c.fail_to_pass + c.pass_to_fail) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::TestBehavior;

    const PATCH: &str = "--- a/pkg/ops.py\n+++ b/pkg/ops.py\n@@ -1,2 +1,2 @@\n def divide(a, b):\n-    return a // b\n+    return a / b\n";

    #[test]
    fn text_counts() {
        assert_eq!(issue_metrics("Fix the bug", "").words, 3);
        let two = "a\n```\nx\n```\nb\n```py\ny\n```\n";
        assert_eq!(issue_metrics(two, "").code_blocks, 2);
        let tb = "Traceback (most recent call last):\n  File \"x.py\", line 1\nValueError: bad\n";
        assert_eq!(issue_metrics(tb, "").error_messages, 1);
    }

    #[test]
    fn error_messages_dedupe_per_block() {
        let text = "KeyError: 'a'\nKeyError: 'a'\n```\nKeyError: 'a'\nTypeError: x\n```\nAn Error occurred here\n";
        assert_eq!(count_error_messages(text), 3);
    }

    #[test]
    fn overlap_with_fix() {
        let issue = "In `ops.py` the line\n    return a // b\ndoes floor division.";
        let m = issue_metrics(issue, PATCH);
        assert_eq!(m.fix_file_names_in_issue, 1);
        assert_eq!(m.fix_lines_in_issue, 1);
        assert_eq!(m.longest_fix_substring, "return a // b".len() as u64 + 1);
    }

    #[test]
    fn complexity() {
        let b: BehaviorMap = [("t", TestBehavior::FAIL_TO_PASS), ("u", TestBehavior::PASS_TO_FAIL)]
            .into_iter()
            .collect();
        let c = fix_complexity(PATCH, &b).unwrap();
        assert_eq!((c.edited_files, c.edited_lines, c.affected_tests), (1, 2, 2));
        assert_eq!(
            fix_complexity("", &BehaviorMap::new()).unwrap(),
            FixComplexity::default()
        );
    }
}
