//! Parsers for the answer formats the prompts mandate.
//!
//! All parsers are total: any input string yields either a value or one of
//! the declared [`AnswerError`]s.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnswerError {
    #[error("no fenced code block and no NONE sentinel in response")]
    NoBlockFound,
    #[error("no `<ANSWER>:` marker in response")]
    NoAnswerMarker,
    #[error("could not find a verdict for `{label}` in response")]
    UnparsableVerdict { label: String },
}

fn is_none_sentinel(text: &str) -> bool {
    let t = text
        .trim()
        .trim_matches(|c: char| matches!(c, '<' | '>' | '`' | '"' | '\'' | '*' | '.'))
        .trim();
    t.eq_ignore_ascii_case("none")
}

/// Removes a trailing ` # comment` that sits outside quotes.
fn strip_trailing_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    let mut prev_ws = true;
    for (i, c) in line.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '\'' || c == '"' => quote = Some(c),
            None if c == '#' && prev_ws => return line[..i].trim_end(),
            None => {}
        }
        prev_ws = c.is_whitespace();
    }
    line
}

fn unquote(line: &str) -> &str {
    for q in ['"', '\''] {
        if line.len() >= 2 && line.starts_with(q) && line.ends_with(q) && line[1..line.len() - 1].find(q).is_none() {
            return &line[1..line.len() - 1];
        }
    }
    line
}

/// Commands inside the first fenced block, or an empty list for `NONE`.
pub fn parse_bash_block(text: &str) -> Result<Vec<String>, AnswerError> {
    if is_none_sentinel(text) {
        return Ok(Vec::new());
    }
    let mut lines = text.lines();
    let mut found = false;
    for line in lines.by_ref() {
        if line.trim_start().starts_with("```") {
            found = true;
            break;
        }
    }
    if !found {
        return Err(AnswerError::NoBlockFound);
    }
    let mut commands = Vec::new();
    for line in lines {
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            break;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cmd = unquote(strip_trailing_comment(trimmed).trim()).trim();
        if !cmd.is_empty() {
            commands.push(cmd.to_string());
        }
    }
    if commands.len() == 1 && is_none_sentinel(&commands[0]) {
        commands.clear();
    }
    Ok(commands)
}

/// Renders commands as a single fenced bash block.
pub fn render_bash_block(commands: &[String]) -> String {
    let mut out = String::from("```bash\n");
    for c in commands {
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("```");
    out
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| haystack.is_char_boundary(i) && h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Items of the `<ANSWER>:` line.
pub fn parse_answer_list(text: &str) -> Result<Vec<String>, AnswerError> {
    let (start, marker_len) = match find_ci(text, "<ANSWER>:") {
        Some(i) => (i, "<ANSWER>:".len()),
        None => match find_ci(text, "ANSWER:") {
            Some(i) => (i, "ANSWER:".len()),
            None => return Err(AnswerError::NoAnswerMarker),
        },
    };
    let rest = &text[start + marker_len..];
    let line = rest.lines().next().unwrap_or("");
    Ok(line
        .split(',')
        .map(|item| item.trim().trim_matches(|c: char| matches!(c, '`' | '"' | '\'')).trim())
        .filter(|item| !item.is_empty())
        .map(ToString::to_string)
        .collect())
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
}

/// First token from `allowed` following `LABEL:`; with an empty label the
/// whole response is scanned for a bare verdict. Matching is
/// case-insensitive; the canonical spelling from `allowed` is returned. A
/// labelled line naming several different allowed tokens is ambiguous.
pub fn parse_labeled<'a>(text: &str, label: &str, allowed: &[&'a str]) -> Result<&'a str, AnswerError> {
    let unparsable = || AnswerError::UnparsableVerdict { label: label.into() };
    let lookup = |tok: &str| allowed.iter().copied().find(|a| a.eq_ignore_ascii_case(tok));
    if label.is_empty() {
        return tokens(text).find_map(lookup).ok_or_else(unparsable);
    }
    let mut marker = String::from(label);
    marker.push(':');
    let start = find_ci(text, &marker).ok_or_else(unparsable)?;
    let line = text[start + marker.len()..].lines().next().unwrap_or("");
    let mut hits = tokens(line).filter_map(lookup);
    let first = hits.next().ok_or_else(unparsable)?;
    if hits.any(|h| h != first) {
        return Err(unparsable());
    }
    Ok(first)
}

/// Text after the `REASONING:` marker (possibly multi-line), or empty.
pub fn parse_reasoning(text: &str) -> String {
    match find_ci(text, "REASONING:") {
        Some(i) => text[i + "REASONING:".len()..]
            .trim()
            .trim_start_matches('<')
            .trim_end_matches('>')
            .trim()
            .to_string(),
        None => String::new(),
    }
}

/// URLs from `LINK:` lines, order-preserving and deduplicated.
pub fn parse_links(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['-', '*', ' ']);
        let Some(head) = line.get(..5) else { continue };
        if !head.eq_ignore_ascii_case("LINK:") {
            continue;
        }
        let url = line[5..].trim().trim_start_matches('<').trim_end_matches('>').trim();
        if !url.is_empty() && !out.iter().any(|u| u == url) {
            out.push(url.to_string());
        }
    }
    out
}

/// Interpreter version from a python-fix answer: `Ok(None)` for `NONE`,
/// otherwise the first `major.minor` found.
pub fn parse_python_version(text: &str) -> Result<Option<String>, AnswerError> {
    if is_none_sentinel(text) {
        return Ok(None);
    }
    for word in text.split(|c: char| !(c.is_ascii_digit() || c == '.')) {
        let mut parts = word.split('.').filter(|p| !p.is_empty());
        if let (Some(major), Some(minor)) = (parts.next(), parts.next()) {
            if major.len() <= 2 && minor.len() <= 3 {
                let mut v = String::from(major);
                v.push('.');
                v.push_str(minor);
                return Ok(Some(v));
            }
        }
    }
    if tokens(text).any(|t| t.eq_ignore_ascii_case("none")) {
        return Ok(None);
    }
    Err(AnswerError::UnparsableVerdict {
        label: "python version".into(),
    })
}
