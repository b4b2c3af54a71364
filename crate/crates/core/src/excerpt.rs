//! Error excerpts handed to the repair prompts.

use alloc::string::String;
use alloc::vec::Vec;

pub const TAIL_LINES: usize = 120;
pub const CONTEXT_LINES: usize = 2;
pub const MAX_CHARS: usize = 8000;

const SIGNATURES: &[&str] = &["Error", "error:", "Traceback", "FAILED", "fatal:"];

pub fn is_error_signature(line: &str) -> bool {
    SIGNATURES.iter().any(|s| line.contains(s))
}

/// The last [`TAIL_LINES`] lines of `output`, preceded by earlier lines that
/// look like errors (with [`CONTEXT_LINES`] lines around each), capped at
/// [`MAX_CHARS`] characters by dropping from the front.
pub fn excerpt_error(output: &str) -> String {
    excerpt_with(output, TAIL_LINES, MAX_CHARS)
}

pub fn excerpt_with(output: &str, tail_lines: usize, max_chars: usize) -> String {
    let lines: Vec<&str> = output.lines().collect();
    let tail_start = lines.len().saturating_sub(tail_lines);
    let mut keep = alloc::vec![false; lines.len()];
    for flag in keep.iter_mut().skip(tail_start) {
        *flag = true;
    }
    for (i, line) in lines.iter().enumerate().take(tail_start) {
        if is_error_signature(line) {
            let lo = i.saturating_sub(CONTEXT_LINES);
            let hi = (i + CONTEXT_LINES).min(lines.len() - 1);
            for flag in &mut keep[lo..=hi] {
                *flag = true;
            }
        }
    }
    let mut out = String::new();
    let mut prev: Option<usize> = None;
    for (i, line) in lines.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        if prev.is_some_and(|p| p + 1 != i) || (prev.is_none() && i > 0) {
            out.push_str("[...]\n");
        }
        out.push_str(line);
        out.push('\n');
        prev = Some(i);
    }
    if !output.ends_with('\n') {
        out.pop();
    }
    let count = out.chars().count();
    if count > max_chars {
        let skip = count - max_chars;
        let start = out.char_indices().nth(skip).map_or(out.len(), |(b, _)| b);
        out.drain(..start);
    }
    out
}
