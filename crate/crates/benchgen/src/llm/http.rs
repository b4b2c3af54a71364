//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use serde_json::{json, Value};
use ureq::Agent;

use super::{ChatProvider, ChatRequest, ChatResponse, LlmError, Usage};

pub struct HttpProvider {
    agent: Agent,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpProvider {
    /// `api_base` is the URL prefix in front of `/chat/completions`.
    pub fn new(api_base: &str, api_key: Option<String>, timeout: Duration) -> HttpProvider {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpProvider {
            agent,
            endpoint: format!("{}/chat/completions", api_base.trim_end_matches('/')),
            api_key,
        }
    }

    /// Reads `LLM_API_BASE` (falling back to `default_base`) and `LLM_API_KEY`.
    pub fn from_env(default_base: &str, timeout: Duration) -> HttpProvider {
        let base = std::env::var("LLM_API_BASE").unwrap_or_else(|_| default_base.to_string());
        HttpProvider::new(&base, std::env::var("LLM_API_KEY").ok(), timeout)
    }
}

fn parse_body(body: &str) -> Result<ChatResponse, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Provider(format!("invalid JSON body: {e}")))?;
    let text = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| LlmError::Provider("response has no choices[0].message.content".into()))?;
    let usage = Usage {
        prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok(ChatResponse {
        text: text.to_string(),
        usage,
    })
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        if request.messages.is_empty() {
            return Err(LlmError::Malformed("request has no messages".into()));
        }
        let body = json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        let mut call = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call
            .send(body.to_string())
            .map_err(|e| LlmError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transient(e.to_string()))?;
        match status {
            200..=299 => parse_body(&text),
            401 | 403 => Err(LlmError::Auth(text)),
            429 => Err(LlmError::RateLimited { attempts: 1 }),
            400 | 404 | 413 | 422 => Err(LlmError::Malformed(format!("HTTP {status}: {text}"))),
            500..=599 | 408 => Err(LlmError::Transient(format!("HTTP {status}"))),
            _ => Err(LlmError::Provider(format!("HTTP {status}: {text}"))),
        }
    }
}
