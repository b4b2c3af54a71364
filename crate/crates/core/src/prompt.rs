//! Prompt catalog.
//!
//! Every LLM-driven step of the setup agent has one template. Bodies carry
//! `{{name}}` placeholders that are filled in a single pass; a placeholder
//! without a value is an error, never silently left in the prompt.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptId {
    FileRelevance,
    LinkHarvest,
    LinkRelevance,
    ExtractInstall,
    ExtractTest,
    ErrorCause,
    PythonFix,
    InstallFixBuild,
    InstallFixRun,
    TestFix,
    ValidateSuccess,
}

impl PromptId {
    pub const ALL: [PromptId; 11] = [
        PromptId::FileRelevance,
        PromptId::LinkHarvest,
        PromptId::LinkRelevance,
        PromptId::ExtractInstall,
        PromptId::ExtractTest,
        PromptId::ErrorCause,
        PromptId::PythonFix,
        PromptId::InstallFixBuild,
        PromptId::InstallFixRun,
        PromptId::TestFix,
        PromptId::ValidateSuccess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptId::FileRelevance => "file-relevance",
            PromptId::LinkHarvest => "link-harvest",
            PromptId::LinkRelevance => "link-relevance",
            PromptId::ExtractInstall => "extract-install",
            PromptId::ExtractTest => "extract-test",
            PromptId::ErrorCause => "error-cause",
            PromptId::PythonFix => "python-fix",
            PromptId::InstallFixBuild => "install-fix-build",
            PromptId::InstallFixRun => "install-fix-run",
            PromptId::TestFix => "test-fix",
            PromptId::ValidateSuccess => "validate-success",
        }
    }

    pub fn template(self) -> PromptTemplate {
        let body = match self {
            PromptId::FileRelevance => include_str!("prompts/file-relevance.txt"),
            PromptId::LinkHarvest => include_str!("prompts/link-harvest.txt"),
            PromptId::LinkRelevance => include_str!("prompts/link-relevance.txt"),
            PromptId::ExtractInstall => include_str!("prompts/extract-install.txt"),
            PromptId::ExtractTest => include_str!("prompts/extract-test.txt"),
            PromptId::ErrorCause => include_str!("prompts/error-cause.txt"),
            PromptId::PythonFix => include_str!("prompts/python-fix.txt"),
            PromptId::InstallFixBuild => include_str!("prompts/install-fix-build.txt"),
            PromptId::InstallFixRun => include_str!("prompts/install-fix-run.txt"),
            PromptId::TestFix => include_str!("prompts/test-fix.txt"),
            PromptId::ValidateSuccess => include_str!("prompts/validate-success.txt"),
        };
        PromptTemplate { id: self, body }
    }

    /// Sent as a follow-up when a response does not follow the answer format.
    pub fn format_reminder(self) -> &'static str {
        match self {
            PromptId::FileRelevance => {
                "Your previous answer did not follow the required format. Reply with exactly one line starting with `<ANSWER>:` followed by the comma-separated files, then one line starting with `<REASONING>:`."
            }
            PromptId::LinkHarvest => {
                "Your previous answer did not follow the required format. Reply only with lines of the form `LINK: <url>`."
            }
            PromptId::LinkRelevance => {
                "Your previous answer did not follow the required format. Reply with `INSTALLATION/TEST COMMANDS: TRUE` or `INSTALLATION/TEST COMMANDS: FALSE`, then a `REASONING:` line."
            }
            PromptId::ExtractInstall
            | PromptId::ExtractTest
            | PromptId::InstallFixBuild
            | PromptId::InstallFixRun
            | PromptId::TestFix => {
                "Your previous answer did not follow the required format. Reply with a single ```bash code block containing only the commands, or with NONE."
            }
            PromptId::ErrorCause => {
                "Your previous answer did not follow the required format. Reply with `RESULT: <PYTHON|INSTALLATION|TESTING|UNDECIDABLE>` followed by a `REASONING:` line."
            }
            PromptId::PythonFix => {
                "Your previous answer did not follow the required format. Reply only with a version number such as 3.9, or with NONE."
            }
            PromptId::ValidateSuccess => "Your previous answer did not follow the required format. Reply with YES or NO only.",
        }
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptId {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| RenderError::UnknownTemplate(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("template `{template}` needs a value for `{placeholder}`")]
    MissingPlaceholder { template: PromptId, placeholder: String },
    #[error("unterminated placeholder in template `{0}`")]
    Unterminated(PromptId),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: PromptId,
    pub body: &'static str,
}

impl PromptTemplate {
    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = Vec::new();
        let mut rest = self.body;
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else { break };
            let name = &after[..end];
            if !names.contains(&name) {
                names.push(name);
            }
            rest = &after[end + 2..];
        }
        names
    }

    /// Substitutes every placeholder. Values are inserted verbatim and are
    /// not themselves scanned for placeholders.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, RenderError> {
        let mut out = String::with_capacity(self.body.len() + vars.iter().map(|(_, v)| v.len()).sum::<usize>());
        let mut rest = self.body;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or(RenderError::Unterminated(self.id))?;
            let name = &after[..end];
            let value = vars
                .iter()
                .rev()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| RenderError::MissingPlaceholder {
                    template: self.id,
                    placeholder: name.into(),
                })?;
            out.push_str(value);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// Renders a command list the way the prompts show it inside a bash block.
pub fn command_lines(commands: &[String]) -> String {
    commands.join("\n")
}
