//! Chat-completion plumbing: request types, providers, retries, rate
//! limiting, cassettes, and the prompt-level gateway.

pub mod cassette;
pub mod gateway;
pub mod http;
pub mod scripted;

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use cassette::Cassette;
pub use gateway::{Gateway, GatewayError};
pub use http::HttpProvider;
pub use scripted::ScriptedProvider;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Message {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Message {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    /// Server-side or transport failure worth retrying.
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("no cassette entry for request {0}")]
    CassetteMiss(String),
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for Box<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (**self).complete(request)
    }
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

/// Retries rate-limit and transient failures with exponential backoff
/// (`base`, `2·base`, `4·base`, ...). Malformed requests and auth errors are
/// returned at once.
pub struct Retrying<P> {
    inner: P,
    budget: u32,
    base: Duration,
    sleep: Sleeper,
}

impl<P: ChatProvider> Retrying<P> {
    pub fn new(inner: P, budget: u32, base: Duration) -> Retrying<P> {
        Retrying {
            inner,
            budget,
            base,
            sleep: Box::new(std::thread::sleep),
        }
    }

    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Retrying<P> {
        self.sleep = Box::new(sleep);
        self
    }
}

impl<P: ChatProvider> ChatProvider for Retrying<P> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut retries = 0u32;
        loop {
            match self.inner.complete(request) {
                Err(e @ (LlmError::RateLimited { .. } | LlmError::Transient(_))) => {
                    if retries >= self.budget {
                        return Err(match e {
                            LlmError::RateLimited { .. } => LlmError::RateLimited { attempts: retries + 1 },
                            LlmError::Transient(msg) => LlmError::Provider(msg),
                            other => other,
                        });
                    }
                    let delay = self.base.saturating_mul(1 << retries.min(16));
                    tracing::warn!(error = %e, retry = retries + 1, delay_secs = delay.as_secs_f64(), "retrying LLM call");
                    (self.sleep)(delay);
                    retries += 1;
                }
                other => return other,
            }
        }
    }
}

/// Token bucket shared by all workers. A rate of zero disables limiting.
pub struct RateLimiter {
    per_minute: u32,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> RateLimiter {
        RateLimiter {
            per_minute,
            state: Mutex::new((f64::from(per_minute), Instant::now())),
        }
    }

    /// Blocks until a request may be dispatched.
    pub fn acquire(&self) {
        if self.per_minute == 0 {
            return;
        }
        let rate = f64::from(self.per_minute) / 60.0;
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * rate;
                st.0 = (st.0 + refill).min(f64::from(self.per_minute));
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}
