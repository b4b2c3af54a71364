//! Web page retrieval for linked documentation.

use std::collections::HashMap;
use std::time::Duration;

use benchgen_core::context::normalize_url;
use benchgen_core::markup::strip_html;
use ureq::Agent;

/// Largest page body read, in bytes.
pub const MAX_PAGE_BYTES: u64 = 2 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
#[error("cannot fetch {url}: {reason}")]
pub struct FetchError {
    pub url: String,
    pub reason: String,
}

/// Returns the readable text of a page.
pub trait PageFetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<String, FetchError>;
}

/// Fetches over HTTP(S). Proxy settings come from the usual environment
/// variables.
pub struct HttpFetcher {
    agent: Agent,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> HttpFetcher {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpFetcher { agent }
    }
}

impl PageFetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<String, FetchError> {
        let err = |reason: String| FetchError {
            url: url.to_string(),
            reason,
        };
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return Err(err("not an http(s) URL".into()));
        }
        let mut resp = self.agent.get(url).call().map_err(|e| err(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(err(format!("HTTP {status}")));
        }
        let html = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .is_none_or(|ct| ct.contains("html"));
        let body = resp
            .body_mut()
            .with_config()
            .limit(MAX_PAGE_BYTES)
            .read_to_string()
            .map_err(|e| err(e.to_string()))?;
        Ok(if html { strip_html(&body) } else { body })
    }
}

/// Canned pages keyed by normalized URL.
#[derive(Debug, Default, Clone)]
pub struct MapFetcher {
    pages: HashMap<String, String>,
}

impl MapFetcher {
    pub fn new<'a>(pages: impl IntoIterator<Item = (&'a str, &'a str)>) -> MapFetcher {
        MapFetcher {
            pages: pages
                .into_iter()
                .map(|(u, p)| (normalize_url(u), p.to_string()))
                .collect(),
        }
    }
}

impl PageFetcher for MapFetcher {
    fn fetch(&self, url: &str) -> Result<String, FetchError> {
        match self.pages.get(&normalize_url(url)) {
            Some(p) if p.trim_start().starts_with('<') => Ok(strip_html(p)),
            Some(p) => Ok(p.clone()),
            None => Err(FetchError {
                url: url.to_string(),
                reason: "HTTP 404".into(),
            }),
        }
    }
}
