use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{malformed, split_failed, strip_ansi, Line, ReportError, SummaryCounts, Tally, TestReport};
use crate::behavior::TestStatus;

const SECTIONS: &[&str] = &[
    "FAILURES",
    "ERRORS",
    "PASSES",
    "warnings summary",
    "short test summary info",
];

fn section_title(line: &str) -> Option<&str> {
    let t = line.trim();
    if t.len() >= 3 && t.starts_with("==") && t.ends_with("==") {
        Some(t.trim_matches('=').trim())
    } else {
        None
    }
}

/// Parses a final summary such as `1 failed, 5 passed in 0.64s`.
pub(super) fn parse_summary(text: &str) -> Option<SummaryCounts> {
    let (counts, time) = text.trim().rsplit_once(" in ")?;
    if !time.trim_start().starts_with(|c: char| c.is_ascii_digit()) || !time.contains('s') {
        return None;
    }
    let mut c = SummaryCounts::default();
    if counts.trim() == "no tests ran" {
        return Some(c);
    }
    let mut any = false;
    for part in counts.split(", ") {
        let (n, word) = part.trim().split_once(' ')?;
        let n: u64 = n.parse().ok()?;
        match word {
            "passed" => c.passed += n,
            "failed" => c.failed += n,
            "error" | "errors" => c.errored += n,
            "skipped" | "xfailed" | "xpassed" => c.skipped += n,
            "deselected" | "warning" | "warnings" | "rerun" | "reruns" => {}
            _ => return None,
        }
        any = true;
    }
    any.then_some(c)
}

/// Splits `id - message` at the first ` - ` outside brackets.
fn split_message(rest: &str) -> &str {
    let bytes = rest.as_bytes();
    let mut depth = 0i32;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'[' => depth += 1,
            b']' => depth -= 1,
            b' ' if depth <= 0 && rest[i..].starts_with(" - ") => return &rest[..i],
            _ => {}
        }
    }
    rest.trim_end()
}

fn status_word(word: &str) -> Option<Option<Line>> {
    match word {
        "PASSED" => Some(Some(Line::Passed)),
        "FAILED" => Some(Some(Line::Failed)),
        "ERROR" => Some(Some(Line::Errored)),
        "SKIPPED" | "XFAIL" | "XPASS" => Some(None),
        _ => None,
    }
}

/// `STATUS id[ - message]`, optionally behind an xdist `[gw0] [ 50%]` prefix.
fn short_line(line: &str) -> Option<(Option<Line>, &str)> {
    let mut t = line.trim_start();
    while t.starts_with('[') {
        let end = t.find(']')?;
        t = t[end + 1..].trim_start();
    }
    let (word, rest) = t.split_once(' ')?;
    let status = status_word(word)?;
    Some((status, split_message(rest.trim_start())))
}

/// `id STATUS[ (reason)][ [ 50%]]`, the verbose progress format.
fn progress_line(line: &str) -> Option<(Option<Line>, &str)> {
    if line.starts_with(' ') {
        return None;
    }
    let bytes = line.as_bytes();
    let mut depth = 0i32;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'[' => depth += 1,
            b']' => depth -= 1,
            b' ' if depth <= 0 => {
                let id = &line[..i];
                let rest = &line[i + 1..];
                let word = rest.split(' ').next().unwrap_or("");
                if let Some(status) = status_word(word) {
                    let tail = rest[word.len()..].trim();
                    let tail_ok =
                        tail.is_empty() || tail.starts_with('(') || tail.starts_with('[') || tail.starts_with('-');
                    if id.contains("::") && tail_ok {
                        return Some((status, id));
                    }
                }
            }
            _ => {}
        }
    }
    None
}

pub(super) fn score(output: &str) -> u32 {
    let text = strip_ansi(output);
    let mut s = 0;
    if text.contains("test session starts") {
        s += 3;
    }
    if text
        .lines()
        .any(|l| section_title(l).map_or(parse_summary(l).is_some(), |t| parse_summary(t).is_some()))
    {
        s += 2;
    }
    if text.contains("short test summary info") {
        s += 1;
    }
    if text
        .lines()
        .any(|l| short_line(l).is_some_and(|(_, id)| id.contains("::")))
    {
        s += 1;
    }
    s
}

pub(super) fn parse(output: &str) -> Result<(BTreeMap<String, TestStatus>, SummaryCounts), ReportError> {
    let text = strip_ansi(output);
    let mut tally = Tally::default();
    let mut summary: Option<SummaryCounts> = None;
    let mut in_short = false;
    let mut in_sections = false;
    for line in text.lines() {
        let line = line.trim_end();
        if let Some(title) = section_title(line) {
            if title == "test session starts" {
                in_sections = false;
                in_short = false;
            } else if let Some(c) = parse_summary(title) {
                summary.get_or_insert_with(SummaryCounts::default).add(c);
                in_short = false;
            } else if SECTIONS.contains(&title) {
                in_sections = true;
                in_short = title == "short test summary info";
            }
            continue;
        }
        if !in_sections && !line.starts_with(' ') {
            if let Some(c) = parse_summary(line) {
                summary.get_or_insert_with(SummaryCounts::default).add(c);
                continue;
            }
        }
        let parsed = if in_short {
            short_line(line)
        } else if !in_sections {
            progress_line(line).or_else(|| short_line(line).filter(|(_, id)| id.contains("::")))
        } else {
            None
        };
        if let Some((Some(kind), id)) = parsed {
            tally.record(id, kind)?;
        }
    }
    match summary {
        Some(s) => {
            tally.check(&s)?;
            Ok((tally.results, s))
        }
        None if !tally.is_empty() => {
            let s = SummaryCounts {
                passed: tally.passed,
                failed: tally.failed,
                errored: tally.errored,
                skipped: 0,
            };
            Ok((tally.results, s))
        }
        None => Err(malformed("no pytest result lines or summary")),
    }
}

fn summary_text(c: &SummaryCounts) -> String {
    let mut parts: Vec<String> = Vec::new();
    if c.failed > 0 {
        parts.push(format!("{} failed", c.failed));
    }
    if c.passed > 0 {
        parts.push(format!("{} passed", c.passed));
    }
    if c.skipped > 0 {
        parts.push(format!("{} skipped", c.skipped));
    }
    if c.errored > 0 {
        parts.push(format!(
            "{} {}",
            c.errored,
            if c.errored == 1 { "error" } else { "errors" }
        ));
    }
    if parts.is_empty() {
        String::from("no tests ran in 0.01s")
    } else {
        format!("{} in 0.42s", parts.join(", "))
    }
}

fn banner(title: &str) -> String {
    let inner = format!(" {title} ");
    let pad = 80usize.saturating_sub(inner.len());
    let left = pad / 2;
    format!(
        "{}{}{}",
        "=".repeat(left.max(1)),
        inner,
        "=".repeat((pad - left).max(1))
    )
}

pub(super) fn render(report: &TestReport) -> String {
    let c = &report.summary_counts;
    let (failed, errored) = split_failed(report);
    let mut out = String::new();
    out.push_str(&banner("test session starts"));
    out.push_str("\nplatform linux -- Python 3.10.12, pytest-9.1.1, pluggy-1.6.0\n");
    out.push_str(&format!("collected {} items\n\n", c.judged() + c.skipped));
    out.push_str(&banner("short test summary info"));
    out.push('\n');
    for (id, status) in &report.results {
        if *status == TestStatus::Pass {
            out.push_str(&format!("PASSED {id}\n"));
        }
    }
    for i in 0..c.skipped {
        out.push_str(&format!("SKIPPED [1] tests/test_skipped.py:{}: not ready\n", i + 1));
    }
    for id in errored {
        out.push_str(&format!("ERROR {id} - RuntimeError: fixture failed\n"));
    }
    for id in failed {
        out.push_str(&format!("FAILED {id} - AssertionError: assert 1 == 2\n"));
    }
    out.push_str(&banner(&summary_text(c)));
    out.push('\n');
    out
}
