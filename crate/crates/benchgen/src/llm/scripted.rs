//! Rule-based offline provider used to drive fixtures and to record
//! cassettes without a live model.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, ChatResponse, LlmError, Usage};

/// Fires when every `when` substring occurs in the last user message.
/// `times` bounds how often a rule may fire; unbounded when absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub when: Vec<String>,
    pub reply: String,
    #[serde(default)]
    pub times: Option<u32>,
}

pub struct ScriptedProvider {
    rules: Mutex<Vec<(Rule, u32)>>,
}

impl ScriptedProvider {
    pub fn new(rules: Vec<Rule>) -> ScriptedProvider {
        ScriptedProvider {
            rules: Mutex::new(rules.into_iter().map(|r| (r, 0)).collect()),
        }
    }

    pub fn load(path: &Path) -> Result<ScriptedProvider, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let rules: Vec<Rule> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(ScriptedProvider::new(rules))
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let prompt = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == super::Role::User)
            .map_or("", |m| m.content.as_str());
        let mut rules = self.rules.lock().unwrap_or_else(|e| e.into_inner());
        for (rule, fired) in rules.iter_mut() {
            if rule.times.is_some_and(|t| *fired >= t) {
                continue;
            }
            if rule.when.iter().all(|w| prompt.contains(w.as_str())) {
                *fired += 1;
                return Ok(ChatResponse {
                    text: rule.reply.clone(),
                    usage: Usage::default(),
                });
            }
        }
        let head: String = prompt.chars().take(160).collect();
        Err(LlmError::Provider(format!(
            "no scripted rule matches prompt starting {head:?}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Message;

    #[test]
    fn first_matching_rule_with_budget_wins() {
        let rules: Vec<Rule> = serde_json::from_str(
            r#"[{"when": ["RESULT"], "reply": "RESULT: TESTING", "times": 1},
                {"when": ["RESULT"], "reply": "RESULT: UNDECIDABLE"},
                {"when": [], "reply": "fallback"}]"#,
        )
        .unwrap();
        let p = ScriptedProvider::new(rules);
        let req = |t: &str| ChatRequest {
            model: "m".into(),
            messages: vec![Message::user(t)],
            temperature: 0.0,
        };
        assert_eq!(p.complete(&req("give RESULT")).unwrap().text, "RESULT: TESTING");
        assert_eq!(p.complete(&req("give RESULT")).unwrap().text, "RESULT: UNDECIDABLE");
        assert_eq!(p.complete(&req("other")).unwrap().text, "fallback");
        assert!(ScriptedProvider::new(vec![]).complete(&req("x")).is_err());
    }
}
