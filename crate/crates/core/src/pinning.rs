//! Historical dependency pinning.
//!
//! Python package installs are routed through `uv pip`, and every
//! `uv pip install` is limited to releases published on or before the
//! instance cutoff date via `--exclude-newer`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::date::Date;

/// Install and test commands for one repository snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandSet {
    pub python_version: String,
    pub install: Vec<String>,
    pub test: Vec<String>,
    pub cutoff_date: Date,
}

impl CommandSet {
    /// Re-pins every command to `cutoff`, replacing older cutoffs.
    pub fn repinned(&self, cutoff: Date) -> CommandSet {
        CommandSet {
            python_version: self.python_version.clone(),
            install: self.install.iter().map(|c| pin_rewrite(c, cutoff)).collect(),
            test: self.test.iter().map(|c| pin_rewrite(c, cutoff)).collect(),
            cutoff_date: cutoff,
        }
    }

    pub fn pin_all(&mut self) {
        *self = self.repinned(self.cutoff_date);
    }
}

const FLAG: &str = "--exclude-newer";

/// Splits a shell command line into simple-command segments, returning the
/// byte range of each. Separators (`&&`, `||`, `;`, `|`, newline) outside
/// quotes end a segment.
pub fn segments(command: &str) -> Vec<Range<usize>> {
    let bytes = command.as_bytes();
    let mut out = Vec::new();
    let mut quote: Option<u8> = None;
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match quote {
            Some(q) => {
                if c == b'\\' && q == b'"' {
                    i += 1;
                } else if c == q {
                    quote = None;
                }
            }
            None => match c {
                b'\\' => i += 1,
                b'\'' | b'"' => quote = Some(c),
                b';' | b'\n' => {
                    out.push(start..i);
                    start = i + 1;
                }
                b'&' if bytes.get(i + 1) == Some(&b'&') => {
                    out.push(start..i);
                    start = i + 2;
                    i += 1;
                }
                b'|' => {
                    out.push(start..i);
                    let len = if bytes.get(i + 1) == Some(&b'|') { 2 } else { 1 };
                    start = i + len;
                    i += len - 1;
                }
                _ => {}
            },
        }
        i += 1;
    }
    out.push(start..command.len().max(start));
    out
}

/// Whitespace-separated words of a simple command, quote-aware, as byte
/// ranges into `segment`.
pub fn words(segment: &str) -> Vec<Range<usize>> {
    let bytes = segment.as_bytes();
    let mut out = Vec::new();
    let mut quote: Option<u8> = None;
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if quote.is_none() && c.is_ascii_whitespace() {
            if let Some(s) = start.take() {
                out.push(s..i);
            }
        } else {
            if start.is_none() {
                start = Some(i);
            }
            match quote {
                Some(q) if c == q => quote = None,
                Some(b'"') if c == b'\\' => i += 1,
                Some(_) => {}
                None if c == b'\'' || c == b'"' => quote = Some(c),
                None if c == b'\\' => i += 1,
                None => {}
            }
        }
        i += 1;
    }
    if let Some(s) = start {
        out.push(s..bytes.len().min(segment.len()));
    }
    out
}

/// Number of leading words that invoke pip directly (`pip`, `pip3`,
/// `python -m pip`, `python3.X -m pip`), or `None`.
fn pip_prefix_len(w: &[&str]) -> Option<usize> {
    match w {
        ["pip" | "pip3", ..] => Some(1),
        [py, "-m", "pip", ..] if is_python_exe(py) => Some(3),
        _ => None,
    }
}

fn is_python_exe(word: &str) -> bool {
    let Some(rest) = word.strip_prefix("python") else {
        return false;
    };
    rest.chars().all(|c| c.is_ascii_digit() || c == '.')
}

fn is_uv_pip_install(w: &[&str]) -> bool {
    matches!(w, ["uv", "pip", "install", ..])
}

fn rewrite_segment(segment: &str, cutoff: &str) -> String {
    let ranges = words(segment);
    let w: Vec<&str> = ranges.iter().map(|r| &segment[r.clone()]).collect();
    let mut seg = String::from(segment);
    let mut ranges = ranges;
    let mut w_owned: Vec<String> = w.iter().map(|s| String::from(*s)).collect();

    if let Some(n) = pip_prefix_len(&w) {
        let prefix_end = ranges[n - 1].end;
        let head_start = ranges[0].start;
        seg = format!("{}uv pip{}", &segment[..head_start], &segment[prefix_end..]);
        ranges = words(&seg);
        w_owned = ranges.iter().map(|r| String::from(&seg[r.clone()])).collect();
    }
    let w_ref: Vec<&str> = w_owned.iter().map(String::as_str).collect();
    if !is_uv_pip_install(&w_ref) {
        return seg;
    }

    // Locate existing cutoff flags, as (word index, words consumed, date).
    let mut flags: Vec<(usize, usize, &str)> = Vec::new();
    let mut i = 0;
    while i < w_ref.len() {
        let word = w_ref[i];
        if word == FLAG {
            let date = w_ref.get(i + 1).copied().unwrap_or("");
            flags.push((i, if i + 1 < w_ref.len() { 2 } else { 1 }, date));
            i += 2;
            continue;
        }
        if let Some(date) = word.strip_prefix(FLAG).and_then(|r| r.strip_prefix('=')) {
            flags.push((i, 1, date));
        }
        i += 1;
    }
    if flags.len() == 1 && flags[0].1 == 2 && flags[0].2 == cutoff {
        return seg;
    }

    // Drop every existing flag, then append the canonical one.
    let mut kept = String::new();
    let mut cursor = 0;
    for (idx, consumed, _) in &flags {
        let first = &ranges[*idx];
        let last = &ranges[idx + consumed - 1];
        let cut_start = seg[..first.start].trim_end().len();
        kept.push_str(&seg[cursor..cut_start]);
        cursor = last.end;
    }
    kept.push_str(&seg[cursor..]);
    let body_len = kept.trim_end().len();
    let trailing = String::from(&kept[body_len..]);
    kept.truncate(body_len);
    kept.push(' ');
    kept.push_str(FLAG);
    kept.push(' ');
    kept.push_str(cutoff);
    kept.push_str(&trailing);
    kept
}

/// Routes pip through `uv pip` and pins every `uv pip install` to `cutoff`.
/// Other commands are returned unchanged. Idempotent.
pub fn pin_rewrite(command: &str, cutoff: Date) -> String {
    let cutoff = format!("{cutoff}");
    let segs = segments(command);
    let mut out = String::with_capacity(command.len() + 32);
    let mut last_end = 0;
    for seg in segs {
        out.push_str(&command[last_end..seg.start]);
        out.push_str(&rewrite_segment(&command[seg.clone()], &cutoff));
        last_end = seg.end;
    }
    out.push_str(&command[last_end..]);
    out
}

/// Segments of `command` that install Python packages through `uv pip`.
pub fn package_install_segments(command: &str) -> Vec<&str> {
    segments(command)
        .into_iter()
        .map(|r| &command[r])
        .filter(|seg| {
            let w: Vec<&str> = words(seg).into_iter().map(|r| &seg[r]).collect();
            is_uv_pip_install(&w) || pip_prefix_len(&w).is_some_and(|n| w.get(n) == Some(&"install"))
        })
        .collect()
}

/// Commands that create or activate virtual environments; the extraction
/// prompts ask for these to be left out and the sandbox provides its own.
pub fn is_virtualenv_command(command: &str) -> bool {
    segments(command).into_iter().any(|r| {
        let seg = &command[r];
        let w: Vec<&str> = words(seg).into_iter().map(|r| &seg[r]).collect();
        match w.as_slice() {
            [py, "-m", "venv" | "virtualenv", ..] if is_python_exe(py) => true,
            ["virtualenv" | "deactivate" | "mkvirtualenv" | "workon", ..] => true,
            ["source" | ".", script, ..] => script.ends_with("activate"),
            ["conda", "create" | "activate", ..] => true,
            ["pyenv", "virtualenv" | "activate", ..] => true,
            ["uv", "venv", ..] => true,
            ["pipenv", "shell", ..] => true,
            _ => false,
        }
    })
}
