//! Context sources for command extraction.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    TextFile,
    CicdFile,
    WebPage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: SourceKind,
    pub locator: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSource {
    pub kind: SourceKind,
    pub locator: String,
    pub content: String,
    pub accepted: bool,
}

/// Which source kinds feed extraction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceSelection {
    #[default]
    All,
    CicdOnly,
    TextOnly,
}

impl SourceSelection {
    pub fn allows(self, kind: SourceKind) -> bool {
        match self {
            SourceSelection::All => true,
            SourceSelection::CicdOnly => kind == SourceKind::CicdFile,
            SourceSelection::TextOnly => kind != SourceKind::CicdFile,
        }
    }
}

fn upper_starts(name: &str, prefixes: &[&str]) -> bool {
    let upper = name.to_ascii_uppercase();
    prefixes.iter().any(|p| upper.starts_with(p))
}

fn has_ext(name: &str, exts: &[&str]) -> bool {
    let lower = name.to_ascii_lowercase();
    exts.iter().any(|e| lower.ends_with(e))
}

fn is_top_level_text(path: &str) -> bool {
    !path.contains('/')
        && upper_starts(
            path,
            &["README", "CONTRIBUTING", "INSTALL", "DEVELOP", "HACKING", "BUILDING"],
        )
}

fn is_docs_text(path: &str) -> bool {
    (path.starts_with("docs/") || path.starts_with("doc/")) && has_ext(path, &[".md", ".rst", ".txt"])
}

fn is_packaging(path: &str) -> bool {
    let base = path.rsplit('/').next().unwrap_or(path);
    let top = !path.contains('/');
    (top && matches!(base, "setup.py" | "setup.cfg" | "pyproject.toml"))
        || ((top || path.starts_with("requirements/")) && base.starts_with("requirements") && base.ends_with(".txt"))
}

fn is_cicd(path: &str) -> bool {
    if let Some(rest) = path.strip_prefix(".github/workflows/") {
        return !rest.contains('/') && has_ext(rest, &[".yml", ".yaml"]);
    }
    if path.starts_with(".circleci/") {
        return true;
    }
    matches!(
        path,
        ".gitlab-ci.yml" | "tox.ini" | "noxfile.py" | "Makefile" | "azure-pipelines.yml" | ".travis.yml"
    )
}

/// Kind of a repository-relative path, or `None` if it is not a context
/// candidate.
pub fn classify_path(path: &str) -> Option<SourceKind> {
    if is_cicd(path) {
        Some(SourceKind::CicdFile)
    } else if is_top_level_text(path) || is_docs_text(path) || is_packaging(path) {
        Some(SourceKind::TextFile)
    } else {
        None
    }
}

fn group(path: &str) -> u8 {
    if is_top_level_text(path) {
        0
    } else if is_docs_text(path) {
        1
    } else if is_cicd(path) {
        2
    } else {
        3
    }
}

/// Candidate context files among the repository's paths: top-level docs,
/// then the docs tree, then CI/CD configs, then packaging files; each group
/// sorted by path.
pub fn discover_candidates<'a>(paths: impl IntoIterator<Item = &'a str>) -> Vec<Candidate> {
    let mut found: Vec<(u8, &str, SourceKind)> = paths
        .into_iter()
        .filter_map(|p| classify_path(p).map(|k| (group(p), p, k)))
        .collect();
    found.sort();
    found.dedup();
    found
        .into_iter()
        .map(|(_, p, kind)| Candidate {
            kind,
            locator: p.to_string(),
        })
        .collect()
}

/// Keeps the candidates named in `answer`. Exact path matches win; otherwise
/// a case-insensitive match on path or unique basename is accepted. Names that
/// match nothing are dropped.
pub fn filter_answer<'c>(candidates: &'c [Candidate], answer: &[String]) -> Vec<&'c Candidate> {
    let mut keep = alloc::vec![false; candidates.len()];
    for name in answer {
        let name = name.trim().trim_start_matches("./");
        if let Some(i) = candidates.iter().position(|c| c.locator == name) {
            keep[i] = true;
            continue;
        }
        if let Some(i) = candidates.iter().position(|c| c.locator.eq_ignore_ascii_case(name)) {
            keep[i] = true;
            continue;
        }
        let by_base: Vec<usize> = candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                c.locator
                    .rsplit('/')
                    .next()
                    .is_some_and(|b| b.eq_ignore_ascii_case(name))
            })
            .map(|(i, _)| i)
            .collect();
        if let [i] = by_base.as_slice() {
            keep[*i] = true;
        }
    }
    candidates
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(c, _)| c)
        .collect()
}

/// The comma-separated name list shown to the file relevance prompt.
pub fn candidate_list(candidates: &[&Candidate]) -> String {
    let names: Vec<&str> = candidates.iter().map(|c| c.locator.as_str()).collect();
    names.join(", ")
}

/// Rough token count used for budgeting (four characters per token).
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Drop priority of a source; higher values are dropped first and README
/// files are never dropped.
fn drop_rank(source: &ContextSource) -> Option<u8> {
    match source.kind {
        SourceKind::WebPage => Some(3),
        SourceKind::CicdFile => Some(1),
        SourceKind::TextFile if is_docs_text(&source.locator) => Some(2),
        SourceKind::TextFile if !source.locator.contains('/') && upper_starts(&source.locator, &["README"]) => None,
        SourceKind::TextFile => Some(0),
    }
}

fn block(source: &ContextSource) -> String {
    let mut s = String::with_capacity(source.locator.len() + source.content.len() + 4);
    s.push_str("## ");
    s.push_str(&source.locator);
    s.push('\n');
    s.push_str(source.content.trim_end());
    s
}

/// Joins accepted sources as `## <name>\n<content>` blocks, dropping
/// low-priority sources until the estimate fits `token_budget`.
pub fn assemble_context(sources: &[ContextSource], token_budget: usize) -> String {
    let mut kept: Vec<(usize, String)> = sources
        .iter()
        .enumerate()
        .filter(|(_, s)| s.accepted && !s.content.trim().is_empty())
        .map(|(i, s)| (i, block(s)))
        .collect();
    let total = |kept: &[(usize, String)]| kept.iter().map(|(_, b)| estimate_tokens(b) + 1).sum::<usize>();
    while total(&kept) > token_budget {
        let victim = kept
            .iter()
            .enumerate()
            .filter_map(|(pos, (i, _))| drop_rank(&sources[*i]).map(|r| (r, *i, pos)))
            .max();
        match victim {
            Some((_, _, pos)) => {
                kept.remove(pos);
            }
            None => break,
        }
    }
    let blocks: Vec<&str> = kept.iter().map(|(_, b)| b.as_str()).collect();
    blocks.join("\n\n")
}

/// Canonical form used to deduplicate links: lower-case scheme and host,
/// no fragment, no default port, no trailing slash.
pub fn normalize_url(url: &str) -> String {
    let url = url.trim();
    let url = url.split('#').next().unwrap_or(url);
    let Some((scheme, rest)) = url.split_once("://") else {
        return url.trim_end_matches('/').to_string();
    };
    let scheme = scheme.to_ascii_lowercase();
    let (authority, path) = match rest.find('/') {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, ""),
    };
    let mut host = authority.to_ascii_lowercase();
    let default_port = match scheme.as_str() {
        "http" => Some(":80"),
        "https" => Some(":443"),
        _ => None,
    };
    if let Some(p) = default_port {
        if let Some(stripped) = host.strip_suffix(p) {
            host = stripped.to_string();
        }
    }
    let mut out = scheme;
    out.push_str("://");
    out.push_str(&host);
    out.push_str(path.trim_end_matches('/'));
    out
}
