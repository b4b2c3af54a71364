//! Unified diff parsing, test/code partitioning, and patch statistics.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("malformed hunk header at line {line}: `{text}`")]
    BadHunkHeader { line: usize, text: String },
    #[error("hunk starting at line {line} ends early")]
    TruncatedHunk { line: usize },
    #[error("unexpected line {line} inside file patch: `{text}`")]
    UnexpectedLine { line: usize, text: String },
    #[error("file patch at line {line} has no paths")]
    MissingPath { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    pub added: Vec<String>,
    pub removed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePatch {
    /// Path before the change, `None` for created files.
    pub old_path: Option<String>,
    /// Path after the change, `None` for deleted files.
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
    pub binary: bool,
    /// The exact text of this file's section, headers included.
    pub text: String,
}

impl FilePatch {
    /// The path this patch is filed under: the new path unless deleted.
    pub fn path(&self) -> &str {
        self.new_path.as_deref().or(self.old_path.as_deref()).unwrap_or("")
    }

    pub fn added_lines(&self) -> usize {
        self.hunks.iter().map(|h| h.added.len()).sum()
    }

    pub fn removed_lines(&self) -> usize {
        self.hunks.iter().map(|h| h.removed.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Diff {
    /// Text before the first file header (commit message etc.).
    pub preamble: String,
    pub files: Vec<FilePatch>,
}

fn strip_prefix_dir(p: &str) -> Option<String> {
    let p = p.split('\t').next().unwrap_or(p).trim_end_matches(['\r', '\n']);
    let p = p.trim_matches('"');
    if p == "/dev/null" {
        return None;
    }
    let p = p.strip_prefix("a/").or_else(|| p.strip_prefix("b/")).unwrap_or(p);
    Some(p.to_string())
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(line: &str) -> Option<(u32, u32, u32, u32)> {
    let rest = line.strip_prefix("@@ -")?;
    let (old, rest) = rest.split_once(" +")?;
    let (new, _) = rest.split_once(" @@")?;
    let (os, ol) = parse_range(old)?;
    let (ns, nl) = parse_range(new)?;
    Some((os, ol, ns, nl))
}

fn is_section_start(lines: &[&str], i: usize) -> bool {
    let l = lines[i];
    l.starts_with("diff --git ") || (l.starts_with("--- ") && lines.get(i + 1).is_some_and(|n| n.starts_with("+++ ")))
}

fn body(line: &str) -> &str {
    line.trim_end_matches('\n').trim_end_matches('\r')
}

/// Parses a unified diff (git or plain style).
pub fn parse(text: &str) -> Result<Diff, DiffError> {
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let mut diff = Diff::default();
    let mut i = 0;
    while i < lines.len() && !is_section_start(&lines, i) {
        diff.preamble.push_str(lines[i]);
        i += 1;
    }
    while i < lines.len() {
        let start = i;
        let mut old_path: Option<String> = None;
        let mut new_path: Option<String> = None;
        let mut seen_paths = false;
        let mut binary = false;
        let mut hunks = Vec::new();
        if let Some(rest) = lines[i].strip_prefix("diff --git ") {
            let rest = body(rest);
            if let Some(idx) = rest.find(" b/") {
                old_path = strip_prefix_dir(&rest[..idx]);
                new_path = strip_prefix_dir(&rest[idx + 1..]);
            }
            i += 1;
            while i < lines.len() && !lines[i].starts_with("@@") && !is_section_start(&lines, i) {
                let l = body(lines[i]);
                if l.starts_with("new file mode") {
                    old_path = None;
                } else if l.starts_with("deleted file mode") {
                    new_path = None;
                } else if let Some(p) = l.strip_prefix("rename from ") {
                    old_path = Some(p.to_string());
                } else if let Some(p) = l.strip_prefix("rename to ") {
                    new_path = Some(p.to_string());
                } else if l.starts_with("Binary files") || l == "GIT binary patch" {
                    binary = true;
                }
                i += 1;
            }
        }
        if i < lines.len() && lines[i].starts_with("--- ") && lines.get(i + 1).is_some_and(|n| n.starts_with("+++ ")) {
            old_path = strip_prefix_dir(&body(lines[i])[4..]);
            new_path = strip_prefix_dir(&body(lines[i + 1])[4..]);
            seen_paths = true;
            i += 2;
        }
        if old_path.is_none() && new_path.is_none() {
            return Err(DiffError::MissingPath { line: start + 1 });
        }
        while i < lines.len() && lines[i].starts_with("@@") {
            let header_line = i;
            let (os, ol, ns, nl) = parse_hunk_header(body(lines[i])).ok_or_else(|| DiffError::BadHunkHeader {
                line: i + 1,
                text: body(lines[i]).to_string(),
            })?;
            i += 1;
            let (mut old_left, mut new_left) = (ol, nl);
            let mut hunk = Hunk {
                old_start: os,
                old_len: ol,
                new_start: ns,
                new_len: nl,
                added: Vec::new(),
                removed: Vec::new(),
            };
            while old_left > 0 || new_left > 0 {
                let Some(raw) = lines.get(i) else {
                    return Err(DiffError::TruncatedHunk { line: header_line + 1 });
                };
                let l = body(raw);
                match l.as_bytes().first() {
                    Some(b' ') | None if old_left > 0 && new_left > 0 => {
                        old_left -= 1;
                        new_left -= 1;
                    }
                    Some(b'-') if old_left > 0 => {
                        old_left -= 1;
                        hunk.removed.push(l[1..].to_string());
                    }
                    Some(b'+') if new_left > 0 => {
                        new_left -= 1;
                        hunk.added.push(l[1..].to_string());
                    }
                    Some(b'\\') => {}
                    _ => return Err(DiffError::TruncatedHunk { line: header_line + 1 }),
                }
                i += 1;
            }
            while i < lines.len() && lines[i].starts_with('\\') {
                i += 1;
            }
            hunks.push(hunk);
        }
        while i < lines.len() && !is_section_start(&lines, i) {
            let l = body(lines[i]);
            if l.starts_with("@@") {
                return Err(DiffError::BadHunkHeader {
                    line: i + 1,
                    text: l.to_string(),
                });
            }
            if seen_paths
                && !hunks.is_empty()
                && (l.starts_with('+') || l.starts_with('-') || l.starts_with(' '))
                && l != "-- "
            {
                return Err(DiffError::UnexpectedLine {
                    line: i + 1,
                    text: l.to_string(),
                });
            }
            i += 1;
        }
        diff.files.push(FilePatch {
            old_path,
            new_path,
            hunks,
            binary,
            text: lines[start..i].concat(),
        });
    }
    Ok(diff)
}

/// Test files: a `test`/`tests` path component, or a `test_*.py` /
/// `*_test.py` file name.
pub fn is_test_file(path: &str) -> bool {
    let mut parts = path.split('/').collect::<Vec<_>>();
    let name = parts.pop().unwrap_or("");
    parts.iter().any(|c| *c == "test" || *c == "tests")
        || (name.starts_with("test_") && name.ends_with(".py"))
        || name.ends_with("_test.py")
}

/// Splits a diff into its non-test part and its test part, per file.
pub fn split_patch(text: &str) -> Result<(String, String), DiffError> {
    let diff = parse(text)?;
    let mut code = String::new();
    let mut tests = String::new();
    for f in &diff.files {
        let touches_test = is_test_file(f.path()) || f.old_path.as_deref().is_some_and(is_test_file);
        if touches_test {
            tests.push_str(&f.text);
        } else {
            code.push_str(&f.text);
        }
    }
    Ok((code, tests))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiffStats {
    pub files: usize,
    pub added: usize,
    pub removed: usize,
}

impl DiffStats {
    pub fn edited_lines(&self) -> usize {
        self.added + self.removed
    }
}

pub fn stats(text: &str) -> Result<DiffStats, DiffError> {
    let diff = parse(text)?;
    let mut paths: Vec<&str> = diff.files.iter().map(FilePatch::path).collect();
    paths.sort_unstable();
    paths.dedup();
    Ok(DiffStats {
        files: paths.len(),
        added: diff.files.iter().map(FilePatch::added_lines).sum(),
        removed: diff.files.iter().map(FilePatch::removed_lines).sum(),
    })
}

/// Test functions defined (`def test_*`) on added and removed lines of a
/// patch, as `(added, removed)` names; a name on both sides counts as edited
/// rather than added or removed.
pub fn test_functions_changed(text: &str) -> Result<(Vec<String>, Vec<String>), DiffError> {
    let diff = parse(text)?;
    let defs = |lines: &mut dyn Iterator<Item = &String>| -> Vec<String> {
        let mut out: Vec<String> = lines
            .filter_map(|l| {
                let t = l.trim_start();
                let t = t.strip_prefix("async ").unwrap_or(t);
                let name = t.strip_prefix("def ")?;
                let name: String = name.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
                name.starts_with("test").then_some(name)
            })
            .collect();
        out.sort();
        out.dedup();
        out
    };
    let added = defs(
        &mut diff
            .files
            .iter()
            .flat_map(|f| f.hunks.iter().flat_map(|h| h.added.iter())),
    );
    let removed = defs(
        &mut diff
            .files
            .iter()
            .flat_map(|f| f.hunks.iter().flat_map(|h| h.removed.iter())),
    );
    let only_added = added.iter().filter(|n| !removed.contains(n)).cloned().collect();
    let only_removed = removed.iter().filter(|n| !added.contains(n)).cloned().collect();
    Ok((only_added, only_removed))
}
