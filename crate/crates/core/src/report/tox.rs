use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{malformed, pytest, strip_ansi, unittest, FrameworkId, ReportError, SummaryCounts, TestReport};
use crate::behavior::TestStatus;

/// Environment name announced by a tox command line, for both the
/// `py310: commands[0]> …` and the older `py39 run-test: commands[0] | …`
/// formats.
fn env_of(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let i = t.find(" run-test: commands[").or_else(|| t.find(": commands["))?;
    let env = &t[..i];
    (!env.is_empty() && !env.contains(' ')).then_some(env)
}

fn markers(text: &str) -> u32 {
    let mut n = 0;
    if text.lines().any(|l| env_of(l).is_some()) {
        n += 1;
    }
    if [
        "congratulations :)",
        "evaluation failed :(",
        "___ summary ___",
        ": commands succeeded",
        ": commands failed",
    ]
    .iter()
    .any(|m| text.contains(m))
    {
        n += 1;
    }
    n
}

fn inner_best(text: &str) -> Option<(u32, FrameworkId)> {
    [
        (pytest::score(text), FrameworkId::Pytest),
        (unittest::score(text, false), FrameworkId::Unittest),
        (unittest::score(text, true), FrameworkId::Nose),
    ]
    .into_iter()
    .filter(|(s, _)| *s > 0)
    .fold(None, |best: Option<(u32, FrameworkId)>, cur| match best {
        Some(b) if b.0 >= cur.0 => Some(b),
        _ => Some(cur),
    })
}

pub(super) fn score(output: &str) -> u32 {
    let text = strip_ansi(output);
    let m = markers(&text);
    match inner_best(&text) {
        Some((s, _)) if m > 0 => s + 1 + m,
        _ => 0,
    }
}

fn sections(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut current_env: Option<&str> = None;
    let mut buf = String::new();
    for line in text.lines() {
        if let Some(env) = env_of(line) {
            if current_env.is_some_and(|c| c != env) {
                out.push(core::mem::take(&mut buf));
            }
            current_env = Some(env);
        }
        buf.push_str(line);
        buf.push('\n');
    }
    out.push(buf);
    out
}

/// Parses each tox environment's output with the runner found inside it
/// and merges the results; a test failing in any environment is failed.
pub(super) fn parse(output: &str) -> Result<(BTreeMap<String, TestStatus>, SummaryCounts), ReportError> {
    let text = strip_ansi(output);
    let mut results: BTreeMap<String, TestStatus> = BTreeMap::new();
    let mut counts = SummaryCounts::default();
    let mut parsed_any = false;
    for section in sections(&text) {
        let Some((_, inner)) = inner_best(&section) else {
            continue;
        };
        let (r, c) = match inner {
            FrameworkId::Pytest => pytest::parse(&section)?,
            _ => unittest::parse(&section)?,
        };
        parsed_any = true;
        counts.add(c);
        for (id, status) in r {
            let e = results.entry(id).or_insert(status);
            if status == TestStatus::Fail {
                *e = TestStatus::Fail;
            }
        }
    }
    if !parsed_any {
        return Err(malformed("no test runner output inside tox environments"));
    }
    Ok((results, counts))
}

pub(super) fn render(report: &TestReport) -> String {
    let inner = TestReport {
        framework: FrameworkId::Pytest,
        ..report.clone()
    };
    let c = &report.summary_counts;
    let ok = c.failed + c.errored == 0;
    let mut out = String::from(
        "py: install_deps> python -I -m pip install pytest\npy: commands[0]> pytest -rA -p no:cacheprovider\n",
    );
    out.push_str(&pytest::render(&inner));
    if ok {
        out.push_str("  py: OK (0.50=setup[0.08]+cmd[0.42] seconds)\n  congratulations :) (0.55 seconds)\n");
    } else {
        out.push_str(
            "py: exit 1 (0.42 seconds) /testbed> pytest -rA -p no:cacheprovider pid=42\n  py: FAIL code 1 (0.50=setup[0.08]+cmd[0.42] seconds)\n  evaluation failed :( (0.55 seconds)\n",
        );
    }
    out
}
