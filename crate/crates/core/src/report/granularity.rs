use alloc::string::String;
use alloc::vec::Vec;

use crate::pinning::{segments, words};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Runner {
    Pytest,
    Unittest,
    Nose,
}

fn is_python_exe(word: &str) -> bool {
    word.strip_prefix("python")
        .is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit() || c == '.'))
}

fn is_env_assignment(word: &str) -> bool {
    match word.split_once('=') {
        Some((name, _)) => {
            !name.is_empty()
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                && !name.starts_with(|c: char| c.is_ascii_digit())
        }
        None => false,
    }
}

/// Runner invoked by a simple command, with the index of the last word of
/// the invocation.
fn invocation(w: &[&str]) -> Option<(Runner, usize)> {
    let skip = w.iter().take_while(|x| is_env_assignment(x)).count();
    let rest = &w[skip..];
    let (runner, len) = match rest {
        ["pytest" | "py.test", ..] => (Runner::Pytest, 1),
        ["nosetests", ..] => (Runner::Nose, 1),
        [py, "-m", "pytest" | "py.test", ..] if is_python_exe(py) => (Runner::Pytest, 3),
        [py, "-m", "unittest", ..] if is_python_exe(py) => (Runner::Unittest, 3),
        [py, "-m", "nose", ..] if is_python_exe(py) => (Runner::Nose, 3),
        ["coverage", "run", tail @ ..] => {
            let m = tail
                .windows(2)
                .position(|p| p[0] == "-m" && matches!(p[1], "pytest" | "unittest"))?;
            let runner = if tail[m + 1] == "pytest" {
                Runner::Pytest
            } else {
                Runner::Unittest
            };
            (runner, 2 + m + 2)
        }
        _ => return None,
    };
    Some((runner, skip + len - 1))
}

fn rewrite_segment(seg: &str) -> String {
    let ranges = words(seg);
    let w: Vec<&str> = ranges.iter().map(|r| &seg[r.clone()]).collect();
    let Some((runner, last)) = invocation(&w) else {
        return String::from(seg);
    };
    let args = &w[last + 1..];
    let insert_at = ranges[last].end;
    let mut out = String::from(seg);
    match runner {
        Runner::Pytest => {
            let mut flags = String::new();
            let mut replaced: Option<usize> = None;
            if !args.contains(&"-rA") {
                match args
                    .iter()
                    .position(|a| a.len() > 2 && a.starts_with("-r") && a[2..].chars().all(|c| c.is_ascii_alphabetic()))
                {
                    Some(i) => replaced = Some(last + 1 + i),
                    None => flags.push_str(" -rA"),
                }
            }
            let has_cache_off =
                args.windows(2).any(|p| p == ["-p", "no:cacheprovider"]) || args.contains(&"-pno:cacheprovider");
            if !has_cache_off {
                flags.push_str(" -p no:cacheprovider");
            }
            if let Some(i) = replaced {
                out.replace_range(ranges[i].clone(), "-rA");
            }
            out.insert_str(insert_at, &flags);
        }
        Runner::Unittest | Runner::Nose => {
            if !args.iter().any(|a| *a == "-v" || *a == "--verbose" || *a == "-vv") {
                out.insert_str(insert_at, " -v");
            }
        }
    }
    out
}

/// Rewrites one command so the test runner reports each test individually.
/// Commands for other runners are returned unchanged. Idempotent.
pub fn ensure_granularity_one(command: &str) -> String {
    let mut out = String::with_capacity(command.len() + 24);
    let mut last = 0;
    for r in segments(command) {
        out.push_str(&command[last..r.start]);
        out.push_str(&rewrite_segment(&command[r.clone()]));
        last = r.end;
    }
    out.push_str(&command[last..]);
    out
}

pub fn ensure_granularity(commands: &[String]) -> Vec<String> {
    commands.iter().map(|c| ensure_granularity_one(c)).collect()
}
