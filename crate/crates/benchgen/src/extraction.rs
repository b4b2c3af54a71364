//! Extraction phase: interpreter version, context gathering, and the first
//! install and test commands.

use benchgen_core::answer::{parse_answer_list, parse_bash_block, parse_labeled, parse_links};
use benchgen_core::context::{
    assemble_context, candidate_list, discover_candidates, filter_answer, normalize_url, Candidate, ContextSource,
    SourceKind, SourceSelection,
};
use benchgen_core::pinning::is_virtualenv_command;
use benchgen_core::prompt::PromptId;
use benchgen_core::python::{find_constraint, resolve_python_version, PythonError};
use benchgen_core::{CommandSet, Date};
use serde::{Deserialize, Serialize};

use crate::fetch::PageFetcher;
use crate::llm::gateway::{Gateway, GatewayError};
use crate::repo::{GitError, Mirror};
use crate::sandbox::WORKDIR;

pub const DEFAULT_INSTALL: &str = "pip install -e .";
pub const DEFAULT_TEST: &str = "pytest";

const PACKAGING: &[&str] = &["pyproject.toml", "setup.cfg", "setup.py"];

#[derive(Debug, thiserror::Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Git(#[from] GitError),
    #[error(transparent)]
    Python(#[from] PythonError),
    #[error("no install or test commands could be extracted")]
    NoCommandsExtracted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionSettings {
    pub browsing: bool,
    pub max_pages: usize,
    pub token_budget: usize,
    pub sources: SourceSelection,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        ExtractionSettings {
            browsing: true,
            max_pages: 5,
            token_budget: 24_000,
            sources: SourceSelection::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub cmds: CommandSet,
    pub sources: Vec<ContextSource>,
    pub from_reference: bool,
}

/// Interpreter version for `commit` from its packaging metadata, or the
/// newest release before `cutoff` when none is declared.
pub fn resolve_python(mirror: &Mirror, commit: &str, cutoff: Date) -> Result<String, ExtractionError> {
    let files: Vec<(&str, String)> = PACKAGING
        .iter()
        .filter_map(|name| mirror.show(commit, name).map(|c| (*name, c)))
        .collect();
    let refs: Vec<(&str, &str)> = files.iter().map(|(n, c)| (*n, c.as_str())).collect();
    let constraint = find_constraint(&refs);
    Ok(resolve_python_version(constraint.as_ref(), cutoff)?)
}

pub struct Extractor<'a> {
    pub gateway: &'a Gateway,
    pub fetcher: &'a dyn PageFetcher,
    pub settings: ExtractionSettings,
}

impl Extractor<'_> {
    /// Text files named by the relevance answer plus every CI/CD file.
    pub fn filter_relevant<'c>(
        &self,
        repo_id: &str,
        candidates: &'c [Candidate],
    ) -> Result<Vec<&'c Candidate>, GatewayError> {
        let text: Vec<Candidate> = candidates
            .iter()
            .filter(|c| c.kind == SourceKind::TextFile)
            .cloned()
            .collect();
        let mut accepted: Vec<String> = Vec::new();
        if !text.is_empty() {
            let list = candidate_list(&text.iter().collect::<Vec<_>>());
            let answer = self.gateway.ask_parsed(
                PromptId::FileRelevance,
                &[("repo_id", repo_id), ("context", &list)],
                parse_answer_list,
            )?;
            accepted = filter_answer(&text, &answer)
                .iter()
                .map(|c| c.locator.clone())
                .collect();
        }
        Ok(candidates
            .iter()
            .filter(|c| c.kind == SourceKind::CicdFile || accepted.contains(&c.locator))
            .collect())
    }

    /// Repository files offered to extraction, with `accepted` marking those
    /// that passed relevance filtering and have content.
    pub fn gather_files(
        &self,
        mirror: &Mirror,
        commit: &str,
        repo_id: &str,
    ) -> Result<Vec<ContextSource>, ExtractionError> {
        let paths = mirror.ls_tree(commit)?;
        let candidates: Vec<Candidate> = discover_candidates(paths.iter().map(String::as_str))
            .into_iter()
            .filter(|c| self.settings.sources.allows(c.kind))
            .collect();
        let kept = self.filter_relevant(repo_id, &candidates)?;
        Ok(candidates
            .iter()
            .map(|c| {
                let accepted = kept.iter().any(|k| k.locator == c.locator);
                let content = if accepted {
                    mirror.show(commit, &c.locator).unwrap_or_default()
                } else {
                    String::new()
                };
                ContextSource {
                    kind: c.kind,
                    locator: c.locator.clone(),
                    accepted: accepted && !content.trim().is_empty(),
                    content,
                }
            })
            .collect())
    }

    /// Follows links named in the accepted sources, one level deep, keeping
    /// pages judged relevant. At most `max_pages` pages are fetched.
    pub fn harvest_links(&self, repo_id: &str, sources: &[ContextSource]) -> Result<Vec<ContextSource>, GatewayError> {
        if !self.settings.browsing || !self.settings.sources.allows(SourceKind::WebPage) || self.settings.max_pages == 0
        {
            return Ok(Vec::new());
        }
        let mut seen: Vec<String> = Vec::new();
        let mut links: Vec<String> = Vec::new();
        for s in sources.iter().filter(|s| s.accepted && s.kind != SourceKind::WebPage) {
            let reply = self
                .gateway
                .ask(PromptId::LinkHarvest, &[("repo_id", repo_id), ("context", &s.content)])?;
            for link in parse_links(&reply) {
                let key = normalize_url(&link);
                if !seen.contains(&key) {
                    seen.push(key);
                    links.push(link);
                }
            }
        }
        let mut pages = Vec::new();
        let mut fetched = 0;
        for link in links {
            if fetched >= self.settings.max_pages {
                break;
            }
            let content = match self.fetcher.fetch(&link) {
                Ok(c) if !c.trim().is_empty() => c,
                Ok(_) => continue,
                Err(e) => {
                    tracing::info!(error = %e, "skipping page");
                    continue;
                }
            };
            fetched += 1;
            let verdict = self.gateway.ask_parsed(
                PromptId::LinkRelevance,
                &[
                    ("repo_id", repo_id),
                    ("current_link", &link),
                    ("clean_content", &content),
                ],
                |t| parse_labeled(t, "INSTALLATION/TEST COMMANDS", &["TRUE", "FALSE"]),
            );
            let accepted = match verdict {
                Ok(v) => v == "TRUE",
                Err(GatewayError::Unparsable { .. }) => false,
                Err(e) => return Err(e),
            };
            pages.push(ContextSource {
                kind: SourceKind::WebPage,
                locator: link,
                content,
                accepted,
            });
        }
        Ok(pages)
    }

    /// Runs both extraction prompts over the assembled context and pins the
    /// result to `cutoff`.
    pub fn extract_commands(
        &self,
        sources: &[ContextSource],
        repo_id: &str,
        python_version: &str,
        cutoff: Date,
    ) -> Result<CommandSet, ExtractionError> {
        let context = assemble_context(sources, self.settings.token_budget);
        if context.trim().is_empty() {
            return Err(ExtractionError::NoCommandsExtracted);
        }
        let vars = [
            ("repo_id", repo_id),
            ("repo_dir", WORKDIR),
            ("context", context.as_str()),
        ];
        let install = self
            .gateway
            .ask_parsed(PromptId::ExtractInstall, &vars, parse_bash_block)?;
        let test = self
            .gateway
            .ask_parsed(PromptId::ExtractTest, &vars, parse_bash_block)?;
        let keep = |v: Vec<String>| -> Vec<String> { v.into_iter().filter(|c| !is_virtualenv_command(c)).collect() };
        let (mut install, mut test) = (keep(install), keep(test));
        match (install.is_empty(), test.is_empty()) {
            (true, true) => return Err(ExtractionError::NoCommandsExtracted),
            (true, false) => install.push(DEFAULT_INSTALL.to_string()),
            (false, true) => test.push(DEFAULT_TEST.to_string()),
            (false, false) => {}
        }
        let mut cmds = CommandSet {
            python_version: python_version.to_string(),
            install,
            test,
            cutoff_date: cutoff,
        };
        cmds.pin_all();
        Ok(cmds)
    }

    /// The whole phase. A reference command set short-circuits context
    /// gathering and the extraction prompts.
    pub fn extract(
        &self,
        mirror: &Mirror,
        commit: &str,
        repo_id: &str,
        cutoff: Date,
        reference: Option<CommandSet>,
    ) -> Result<Extraction, ExtractionError> {
        if let Some(cmds) = reference {
            return Ok(Extraction {
                cmds: cmds.repinned(cutoff),
                sources: Vec::new(),
                from_reference: true,
            });
        }
        let python = resolve_python(mirror, commit, cutoff)?;
        let mut sources = self.gather_files(mirror, commit, repo_id)?;
        let pages = self.harvest_links(repo_id, &sources)?;
        sources.extend(pages);
        let cmds = self.extract_commands(&sources, repo_id, &python, cutoff)?;
        Ok(Extraction {
            cmds,
            sources,
            from_reference: false,
        })
    }
}
