//! Record/replay of chat completions keyed by a request digest.
//!
//! The file is a JSON array of `{"request": <sha256 hex>, "response": <text>}`
//! in call order. The digest covers model, temperature, and messages after
//! volatile text (timings, temporary paths, digests, addresses) is masked, so
//! a replay sees the same keys as the recording run. When the exact digest
//! is missing (for example because a tool version printed in a transcript
//! differs), replay falls back to the request shape: model, message count,
//! and the first line of every message, served in recorded order.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatProvider, ChatRequest, ChatResponse, LlmError, Usage};
use crate::config::CassetteMode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub request: String,
    /// Coarser digest used when no entry has the exact request digest.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub shape: String,
    pub response: String,
}

#[derive(Default)]
struct State {
    entries: Vec<CassetteEntry>,
    cursors: HashMap<String, usize>,
    shape_cursors: HashMap<String, usize>,
}

pub struct Cassette {
    mode: CassetteMode,
    path: Option<PathBuf>,
    inner: Option<Box<dyn ChatProvider>>,
    state: Mutex<State>,
}

#[derive(Debug, thiserror::Error)]
pub enum CassetteError {
    #[error("cannot read cassette {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("invalid cassette {0}: {1}")]
    Parse(PathBuf, serde_json::Error),
    #[error("mode {0:?} needs a live provider")]
    NoProvider(CassetteMode),
}

fn is_float(s: &str) -> bool {
    let mut parts = s.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_some_and(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

fn is_clock(s: &str) -> bool {
    let parts: Vec<&str> = s.split(':').collect();
    parts.len() == 3
        && parts
            .iter()
            .all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()))
}

fn scrub_word(word: &str, next: Option<&str>) -> String {
    if let Some(i) = word.find("/tmp/") {
        return format!("{}/tmp/*", &word[..i]);
    }
    let core = word.trim_matches(|c: char| matches!(c, '(' | ')' | ',' | '[' | ']' | '=' | ';' | '"' | '\''));
    if let Some(num) = core.strip_suffix('s') {
        if is_float(num) {
            return word.replace(core, "<t>s");
        }
    }
    if is_float(core) && next.is_some_and(|n| n.starts_with("second") || n.starts_with("sec")) {
        return word.replace(core, "<t>");
    }
    if is_clock(core) {
        return word.replace(core, "<clock>");
    }
    let hexlike = |s: &str| s.len() >= 32 && s.bytes().all(|b| b.is_ascii_hexdigit());
    if let Some(i) = word.find("0x") {
        let digits = word[i + 2..].bytes().take_while(u8::is_ascii_hexdigit).count();
        if digits >= 6 {
            return format!("{}0x<addr>{}", &word[..i], &word[i + 2 + digits..]);
        }
    }
    if let Some((k, v)) = core.split_once('=') {
        if hexlike(v) {
            return word.replace(core, &format!("{k}=<hex>"));
        }
    }
    if hexlike(core) {
        return word.replace(core, "<hex>");
    }
    word.to_string()
}

/// Masks text that varies between otherwise identical runs.
pub fn scrub(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        let ws = rest.len() - rest.trim_start().len();
        out.push_str(&rest[..ws]);
        rest = &rest[ws..];
        if rest.is_empty() {
            break;
        }
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let word = &rest[..end];
        let after = rest[end..].trim_start();
        let next = after.split_whitespace().next();
        out.push_str(&scrub_word(word, next));
        rest = &rest[end..];
    }
    out
}

pub fn request_key(request: &ChatRequest) -> String {
    let mut h = Sha256::new();
    h.update(request.model.as_bytes());
    h.update([0]);
    h.update(format!("{:.3}", request.temperature).as_bytes());
    for m in &request.messages {
        h.update([0]);
        h.update(serde_json::to_string(&m.role).unwrap_or_default().as_bytes());
        h.update([0]);
        h.update(scrub(&m.content).as_bytes());
    }
    hex::encode(h.finalize())
}

/// Digest of the model, message count, and first line of each message.
pub fn request_shape(request: &ChatRequest) -> String {
    let mut h = Sha256::new();
    h.update(request.model.as_bytes());
    h.update(request.messages.len().to_le_bytes());
    for m in &request.messages {
        h.update([0]);
        h.update(scrub(m.content.lines().next().unwrap_or("")).as_bytes());
    }
    hex::encode(h.finalize())
}

fn next_of(
    entries: &[CassetteEntry],
    cursors: &mut HashMap<String, usize>,
    key: &str,
    field: fn(&CassetteEntry) -> &str,
) -> Option<String> {
    let matches: Vec<usize> = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| field(e) == key)
        .map(|(i, _)| i)
        .collect();
    let last = *matches.last()?;
    let cursor = cursors.entry(key.to_string()).or_insert(0);
    let idx = matches.get(*cursor).copied().unwrap_or(last);
    *cursor += 1;
    Some(entries[idx].response.clone())
}

impl Cassette {
    /// `inner` is required for record and live modes; replay never uses it.
    pub fn open(
        mode: CassetteMode,
        path: Option<&Path>,
        inner: Option<Box<dyn ChatProvider>>,
    ) -> Result<Cassette, CassetteError> {
        let mut state = State::default();
        match mode {
            CassetteMode::Replay => {
                if let Some(p) = path {
                    let text = std::fs::read_to_string(p).map_err(|e| CassetteError::Io(p.into(), e))?;
                    state.entries = serde_json::from_str(&text).map_err(|e| CassetteError::Parse(p.into(), e))?;
                }
            }
            CassetteMode::Record | CassetteMode::Live => {
                if inner.is_none() {
                    return Err(CassetteError::NoProvider(mode));
                }
            }
        }
        Ok(Cassette {
            mode,
            path: path.map(Path::to_path_buf),
            inner: if mode == CassetteMode::Replay { None } else { inner },
            state: Mutex::new(state),
        })
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn entries(&self) -> Vec<CassetteEntry> {
        self.state.lock().unwrap_or_else(|e| e.into_inner()).entries.clone()
    }

    fn save(&self, entries: &[CassetteEntry]) -> std::io::Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, entries)?;
        tmp.write_all(b"\n")?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    /// Entries for `key` are served in recorded order; once exhausted the
    /// last one repeats. Without an exact match the shape decides.
    fn replay(&self, key: &str, shape: &str) -> Option<String> {
        let mut guard = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let st = &mut *guard;
        if let Some(text) = next_of(&st.entries, &mut st.cursors, key, |e| &e.request) {
            return Some(text);
        }
        let text = next_of(&st.entries, &mut st.shape_cursors, shape, |e| &e.shape)?;
        tracing::warn!(key, "cassette replay matched by request shape");
        Some(text)
    }
}

impl ChatProvider for Cassette {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let key = request_key(request);
        match (self.mode, &self.inner) {
            (CassetteMode::Replay, _) => self
                .replay(&key, &request_shape(request))
                .map(|text| ChatResponse {
                    text,
                    usage: Usage::default(),
                })
                .ok_or(LlmError::CassetteMiss(key)),
            (_, Some(inner)) => {
                let resp = inner.complete(request)?;
                if self.mode == CassetteMode::Record {
                    let mut st = self.state.lock().unwrap_or_else(|e| e.into_inner());
                    st.entries.push(CassetteEntry {
                        request: key,
                        shape: request_shape(request),
                        response: resp.text.clone(),
                    });
                    self.save(&st.entries)
                        .map_err(|e| LlmError::Provider(format!("cannot write cassette: {e}")))?;
                }
                Ok(resp)
            }
            (_, None) => Err(LlmError::Provider("no live provider configured".into())),
        }
    }
}
