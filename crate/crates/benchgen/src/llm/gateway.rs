//! Prompt-level access to the model: render a template, dispatch it at
//! temperature 0, and parse the answer with a single format reprompt.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use benchgen_core::answer::AnswerError;
use benchgen_core::prompt::{PromptId, RenderError};

use super::{ChatProvider, ChatRequest, LlmError, Message, RateLimiter};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("unparsable {prompt} answer: {source}")]
    Unparsable { prompt: PromptId, source: AnswerError },
}

pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    model: String,
    limiter: RateLimiter,
    calls: AtomicU64,
    prompt_tokens: AtomicU64,
    completion_tokens: AtomicU64,
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>, model: impl Into<String>, requests_per_minute: u32) -> Gateway {
        Gateway {
            provider,
            model: model.into(),
            limiter: RateLimiter::new(requests_per_minute),
            calls: AtomicU64::new(0),
            prompt_tokens: AtomicU64::new(0),
            completion_tokens: AtomicU64::new(0),
        }
    }

    /// `(calls, prompt tokens, completion tokens)` so far.
    pub fn usage(&self) -> (u64, u64, u64) {
        (
            self.calls.load(Ordering::Relaxed),
            self.prompt_tokens.load(Ordering::Relaxed),
            self.completion_tokens.load(Ordering::Relaxed),
        )
    }

    fn send(&self, prompt: PromptId, messages: Vec<Message>) -> Result<String, LlmError> {
        self.limiter.acquire();
        let request = ChatRequest {
            model: self.model.clone(),
            messages,
            temperature: 0.0,
        };
        let resp = self.provider.complete(&request)?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.prompt_tokens
            .fetch_add(resp.usage.prompt_tokens, Ordering::Relaxed);
        self.completion_tokens
            .fetch_add(resp.usage.completion_tokens, Ordering::Relaxed);
        tracing::debug!(prompt = %prompt, reply_chars = resp.text.len(), "llm reply");
        Ok(resp.text)
    }

    pub fn ask(&self, prompt: PromptId, vars: &[(&str, &str)]) -> Result<String, GatewayError> {
        let text = prompt.template().render(vars)?;
        Ok(self.send(prompt, vec![Message::user(text)])?)
    }

    /// Parses the reply; on a format error the conversation is extended with
    /// the prompt's format reminder exactly once before giving up.
    pub fn ask_parsed<T>(
        &self,
        prompt: PromptId,
        vars: &[(&str, &str)],
        parse: impl Fn(&str) -> Result<T, AnswerError>,
    ) -> Result<T, GatewayError> {
        let text = prompt.template().render(vars)?;
        let mut messages = vec![Message::user(text)];
        let first = self.send(prompt, messages.clone())?;
        if let Ok(v) = parse(&first) {
            return Ok(v);
        }
        tracing::info!(prompt = %prompt, "reprompting for answer format");
        messages.push(Message::assistant(first));
        messages.push(Message::user(prompt.format_reminder()));
        let second = self.send(prompt, messages)?;
        parse(&second).map_err(|source| GatewayError::Unparsable { prompt, source })
    }
}
