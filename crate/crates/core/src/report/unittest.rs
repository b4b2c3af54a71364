use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use super::{malformed, split_failed, strip_ansi, Line, ReportError, SummaryCounts, Tally, TestReport};
use crate::behavior::TestStatus;

fn is_dotted_name(s: &str) -> bool {
    !s.is_empty()
        && s.split('.')
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_alphanumeric() || c == '_'))
}

/// Canonical id from `name (module.Class)` or `name (module.Class.name)` or a
/// bare dotted name.
fn test_id(head: &str) -> Option<String> {
    let head = head.trim();
    if let Some((name, rest)) = head.split_once(" (") {
        let inner = rest.strip_suffix(')')?;
        if !is_dotted_name(name) || !is_dotted_name(inner) {
            return None;
        }
        let suffix = format!(".{name}");
        return Some(if inner.ends_with(&suffix) {
            String::from(inner)
        } else {
            format!("{inner}.{name}")
        });
    }
    is_dotted_name(head).then(|| String::from(head))
}

enum Verdict {
    Line(Line),
    Skip,
}

fn verdict(word: &str) -> Option<Verdict> {
    let w = word.trim();
    match w {
        "ok" => Some(Verdict::Line(Line::Passed)),
        "FAIL" => Some(Verdict::Line(Line::Failed)),
        "ERROR" => Some(Verdict::Line(Line::Errored)),
        _ if w.starts_with("skipped") || w == "expected failure" || w == "unexpected success" => Some(Verdict::Skip),
        _ => None,
    }
}

fn ran_count(line: &str) -> Option<u64> {
    let rest = line.trim().strip_prefix("Ran ")?;
    let (n, rest) = rest.split_once(' ')?;
    (rest.starts_with("test")).then_some(())?;
    n.parse().ok()
}

/// `OK`, `OK (skipped=1)`, `FAILED (failures=1, errors=2)` or `NO TESTS RAN`.
fn outcome(line: &str, ran: u64) -> Option<Result<SummaryCounts, ReportError>> {
    let t = line.trim();
    let body = if t == "OK" || t == "NO TESTS RAN" || t == "FAILED" {
        ""
    } else {
        t.strip_prefix("OK (")
            .or_else(|| t.strip_prefix("FAILED ("))?
            .strip_suffix(')')?
    };
    let mut failures = 0;
    let mut errors = 0;
    let mut skipped = 0;
    for part in body.split(", ").filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=')?;
        let v: u64 = v.parse().ok()?;
        match k {
            "failures" => failures += v,
            "errors" => errors += v,
            "skipped" | "expected failures" | "unexpected successes" => skipped += v,
            _ => return None,
        }
    }
    let Some(passed) = ran.checked_sub(failures + errors + skipped) else {
        return Some(Err(malformed(format!(
            "summary counts exceed the {ran} tests that ran"
        ))));
    };
    Some(Ok(SummaryCounts {
        passed,
        failed: failures,
        errored: errors,
        skipped,
    }))
}

pub(super) fn score(output: &str, nose: bool) -> u32 {
    let text = strip_ansi(output);
    let mut s = 0;
    if text.lines().any(|l| ran_count(l).is_some()) {
        s += 3;
    }
    let mut paren = false;
    let mut bare = false;
    for line in text.lines() {
        if let Some((head, word)) = line.rsplit_once(" ... ") {
            if verdict(word).is_some() {
                if head.contains(" (") && test_id(head).is_some() {
                    paren = true;
                } else if test_id(head).is_some() {
                    bare = true;
                }
            }
        }
    }
    if nose {
        if text.contains("nosetests") || text.contains("/nose/") || text.contains("nose.") {
            s += 3;
        }
        if bare && !paren {
            s += 1;
        }
    } else if paren {
        s += 1;
    }
    if s == 0 || (s < 3 && !paren && !bare) {
        0
    } else {
        s
    }
}

pub(super) fn parse(output: &str) -> Result<(BTreeMap<String, TestStatus>, SummaryCounts), ReportError> {
    let text = strip_ansi(output);
    let mut tally = Tally::default();
    let mut summary: Option<SummaryCounts> = None;
    let mut pending: Option<String> = None;
    let mut ran: Option<u64> = None;
    for line in text.lines() {
        let trimmed = line.trim_end();
        if let Some(n) = ran_count(trimmed) {
            ran = Some(n);
            continue;
        }
        if let Some(n) = ran {
            if trimmed.is_empty() {
                continue;
            }
            if let Some(result) = outcome(trimmed, n) {
                summary.get_or_insert_with(SummaryCounts::default).add(result?);
            }
            ran = None;
            continue;
        }
        if let Some((head, word)) = trimmed.rsplit_once(" ... ") {
            let id = test_id(head).or_else(|| pending.take());
            match (id, verdict(word)) {
                (Some(id), Some(Verdict::Line(kind))) => tally.record(&id, kind)?,
                (Some(_), Some(Verdict::Skip)) => {}
                (Some(id), None) => pending = Some(id),
                (None, _) => {}
            }
            continue;
        }
        if let Some(id) = pending.take() {
            match verdict(trimmed) {
                Some(Verdict::Line(kind)) => tally.record(&id, kind)?,
                Some(Verdict::Skip) => {}
                None => pending = Some(id),
            }
            continue;
        }
        if trimmed.contains(" (") && !trimmed.starts_with(' ') {
            pending = test_id(trimmed);
        }
    }
    match summary {
        Some(s) => {
            tally.check(&s)?;
            Ok((tally.results, s))
        }
        None => Err(malformed("no `Ran N tests` summary")),
    }
}

pub(super) fn render(report: &TestReport, nose: bool) -> String {
    let c = &report.summary_counts;
    let (failed, errored) = split_failed(report);
    let mut out = String::new();
    let line = |out: &mut String, id: &str, word: &str| {
        let text = match id.rsplit_once('.') {
            Some((class, name)) if !nose => format!("{name} ({class}) ... {word}\n"),
            _ => format!("{id} ... {word}\n"),
        };
        out.push_str(&text);
    };
    for (id, status) in &report.results {
        if *status == TestStatus::Pass {
            line(&mut out, id, "ok");
        }
    }
    for id in &failed {
        line(&mut out, id, "FAIL");
    }
    for id in &errored {
        line(&mut out, id, "ERROR");
    }
    for i in 0..c.skipped {
        line(
            &mut out,
            &format!("tests.test_skips.SkipTests.test_skip_{i}"),
            "skipped 'not ready'",
        );
    }
    out.push_str("\n----------------------------------------------------------------------\n");
    out.push_str(&format!("Ran {} tests in 0.001s\n\n", c.judged() + c.skipped));
    let mut parts = alloc::vec::Vec::new();
    if c.failed > 0 {
        parts.push(format!("failures={}", c.failed));
    }
    if c.errored > 0 {
        parts.push(format!("errors={}", c.errored));
    }
    if c.skipped > 0 {
        parts.push(format!("skipped={}", c.skipped));
    }
    let head = if c.failed + c.errored > 0 { "FAILED" } else { "OK" };
    if parts.is_empty() {
        out.push_str(head);
    } else {
        out.push_str(&format!("{head} ({})", parts.join(", ")));
    }
    out.push('\n');
    out
}
