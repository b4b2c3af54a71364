//! GitHub REST client with conditional requests and rate-limit backoff.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use benchgen_core::dataset::{closing_references, IssueRef, PullRecord};
use serde_json::{json, Value};
use ureq::Agent;

use super::{Forge, ForgeError, PullSummary, RepoMeta};

const DEFAULT_API: &str = "https://api.github.com";
const DIFF_MEDIA: &str = "application/vnd.github.v3.diff";

pub struct GithubForge {
    agent: Agent,
    api: String,
    token: Option<String>,
    /// URL + media type → (ETag, body).
    cache: Mutex<HashMap<String, (String, String)>>,
    max_wait: Duration,
    retries: u32,
}

impl GithubForge {
    pub fn new(api: &str, token: Option<String>) -> GithubForge {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        GithubForge {
            agent,
            api: api.trim_end_matches('/').to_string(),
            token,
            cache: Mutex::new(HashMap::new()),
            max_wait: Duration::from_secs(900),
            retries: 3,
        }
    }

    /// `GITHUB_API_URL` (default api.github.com) and `GITHUB_TOKEN`.
    pub fn from_env() -> GithubForge {
        let api = std::env::var("GITHUB_API_URL").unwrap_or_else(|_| DEFAULT_API.to_string());
        GithubForge::new(&api, std::env::var("GITHUB_TOKEN").ok().filter(|t| !t.is_empty()))
    }

    pub fn with_max_wait(mut self, max_wait: Duration) -> GithubForge {
        self.max_wait = max_wait;
        self
    }

    fn wait_time(resp: &ureq::http::Response<ureq::Body>) -> Option<Duration> {
        let header = |k: &str| resp.headers().get(k).and_then(|v| v.to_str().ok()).map(str::to_string);
        if let Some(secs) = header("retry-after").and_then(|v| v.parse::<u64>().ok()) {
            return Some(Duration::from_secs(secs));
        }
        if header("x-ratelimit-remaining").as_deref() == Some("0") {
            let reset = header("x-ratelimit-reset").and_then(|v| v.parse::<u64>().ok())?;
            let now = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .unwrap_or_default()
                .as_secs();
            return Some(Duration::from_secs(reset.saturating_sub(now) + 1));
        }
        None
    }

    fn get(&self, path: &str, accept: &str) -> Result<String, ForgeError> {
        let url = format!("{}{}", self.api, path);
        let key = format!("{accept} {url}");
        let mut attempt = 0;
        loop {
            let mut req = self
                .agent
                .get(&url)
                .header("Accept", accept)
                .header("User-Agent", "benchgen")
                .header("X-GitHub-Api-Version", "2022-11-28");
            if let Some(t) = &self.token {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            let cached = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key).cloned();
            if let Some((etag, _)) = &cached {
                req = req.header("If-None-Match", etag);
            }
            let mut resp = req.call().map_err(|e| ForgeError::Http(format!("{url}: {e}")))?;
            let status = resp.status().as_u16();
            match status {
                200 => {
                    let etag = resp
                        .headers()
                        .get("etag")
                        .and_then(|v| v.to_str().ok())
                        .map(str::to_string);
                    let body = resp
                        .body_mut()
                        .with_config()
                        .limit(64 << 20)
                        .read_to_string()
                        .map_err(|e| ForgeError::Http(format!("{url}: {e}")))?;
                    if let Some(etag) = etag {
                        self.cache
                            .lock()
                            .unwrap_or_else(|e| e.into_inner())
                            .insert(key, (etag, body.clone()));
                    }
                    return Ok(body);
                }
                304 => {
                    if let Some((_, body)) = cached {
                        return Ok(body);
                    }
                    return Err(ForgeError::Http(format!("{url}: 304 without a cached body")));
                }
                404 | 410 | 451 => return Err(ForgeError::NotFound(url)),
                403 | 429 => {
                    let wait = Self::wait_time(&resp);
                    match wait {
                        Some(w) if attempt < self.retries && w <= self.max_wait => {
                            tracing::warn!(url = %url, wait_secs = w.as_secs(), "forge rate limit, backing off");
                            std::thread::sleep(w);
                            attempt += 1;
                        }
                        Some(_) => return Err(ForgeError::RateLimited(url)),
                        None if status == 429 => return Err(ForgeError::RateLimited(url)),
                        None => return Err(ForgeError::Http(format!("{url}: HTTP 403"))),
                    }
                }
                500..=599 if attempt < self.retries => {
                    std::thread::sleep(Duration::from_secs(1 << attempt));
                    attempt += 1;
                }
                _ => return Err(ForgeError::Http(format!("{url}: HTTP {status}"))),
            }
        }
    }

    fn get_json(&self, path: &str) -> Result<Value, ForgeError> {
        let body = self.get(path, "application/vnd.github+json")?;
        serde_json::from_str(&body).map_err(|e| ForgeError::Invalid(format!("{path}: {e}")))
    }

    fn issue(&self, repo: &str, number: u64) -> Result<Option<IssueRef>, ForgeError> {
        let v = match self.get_json(&format!("/repos/{repo}/issues/{number}")) {
            Ok(v) => v,
            Err(ForgeError::NotFound(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if v.get("pull_request").is_some_and(|p| !p.is_null()) {
            return Ok(None);
        }
        Ok(Some(IssueRef {
            number,
            title: v["title"].as_str().unwrap_or_default().to_string(),
            body: v["body"].as_str().unwrap_or_default().to_string(),
            created_at: v["created_at"].as_str().unwrap_or_default().to_string(),
        }))
    }

    /// Issues linked through the pull request's sidebar, which needs the
    /// GraphQL API and therefore a token.
    fn timeline_issues(&self, repo: &str, number: u64) -> Vec<u64> {
        let Some(token) = &self.token else { return Vec::new() };
        let Some((owner, name)) = repo.split_once('/') else {
            return Vec::new();
        };
        let query = "query($o:String!,$n:String!,$p:Int!){repository(owner:$o,name:$n){pullRequest(number:$p){closingIssuesReferences(first:10){nodes{number}}}}}";
        let body = json!({"query": query, "variables": {"o": owner, "n": name, "p": number}});
        let resp = self
            .agent
            .post(&format!("{}/graphql", self.api))
            .header("Authorization", &format!("Bearer {token}"))
            .header("User-Agent", "benchgen")
            .send(body.to_string());
        let Ok(mut resp) = resp else { return Vec::new() };
        let Ok(v) = resp.body_mut().read_json::<Value>() else {
            return Vec::new();
        };
        v["data"]["repository"]["pullRequest"]["closingIssuesReferences"]["nodes"]
            .as_array()
            .map(|a| a.iter().filter_map(|n| n["number"].as_u64()).collect())
            .unwrap_or_default()
    }
}

impl Forge for GithubForge {
    fn repo(&self, repo: &str) -> Result<RepoMeta, ForgeError> {
        let v = self.get_json(&format!("/repos/{repo}"))?;
        let license = v["license"]["spdx_id"]
            .as_str()
            .filter(|s| *s != "NOASSERTION")
            .map(str::to_string);
        Ok(RepoMeta {
            full_name: v["full_name"].as_str().unwrap_or(repo).to_string(),
            clone_url: v["clone_url"]
                .as_str()
                .map(str::to_string)
                .unwrap_or_else(|| format!("https://github.com/{repo}.git")),
            license,
            stars: v["stargazers_count"].as_u64(),
            created_at: v["created_at"].as_str().map(str::to_string),
        })
    }

    fn list_pulls(&self, repo: &str, page: u32, per_page: u32) -> Result<Vec<PullSummary>, ForgeError> {
        let v = self.get_json(&format!(
            "/repos/{repo}/pulls?state=closed&sort=created&direction=desc&per_page={per_page}&page={page}"
        ))?;
        let items = v
            .as_array()
            .ok_or_else(|| ForgeError::Invalid("pull list is not an array".into()))?;
        Ok(items
            .iter()
            .filter_map(|p| {
                Some(PullSummary {
                    number: p["number"].as_u64()?,
                    merged: p["merged_at"].is_string(),
                })
            })
            .collect())
    }

    fn pull_record(&self, repo: &str, number: u64) -> Result<PullRecord, ForgeError> {
        let v = self.get_json(&format!("/repos/{repo}/pulls/{number}"))?;
        let mut files = Vec::new();
        for page in 1..=30 {
            let batch = self.get_json(&format!("/repos/{repo}/pulls/{number}/files?per_page=100&page={page}"))?;
            let batch = batch.as_array().cloned().unwrap_or_default();
            files.extend(batch.iter().filter_map(|f| f["filename"].as_str().map(str::to_string)));
            if batch.len() < 100 {
                break;
            }
        }
        let diff = self.get(&format!("/repos/{repo}/pulls/{number}"), DIFF_MEDIA)?;
        let text = format!(
            "{}\n{}",
            v["title"].as_str().unwrap_or_default(),
            v["body"].as_str().unwrap_or_default()
        );
        let mut candidates = closing_references(&text, repo);
        if candidates.is_empty() {
            candidates = self.timeline_issues(repo, number);
        }
        let mut linked_issue = None;
        for n in candidates {
            if let Some(issue) = self.issue(repo, n)? {
                linked_issue = Some(issue);
                break;
            }
        }
        let repo_meta = self.repo(repo).ok();
        Ok(PullRecord {
            repo: repo.to_string(),
            number,
            merged: v["merged"].as_bool().unwrap_or(false) || v["merged_at"].is_string(),
            merged_at: v["merged_at"].as_str().map(str::to_string),
            created_at: v["created_at"].as_str().unwrap_or_default().to_string(),
            linked_issue,
            files_changed: files,
            diff,
            base_commit: v["base"]["sha"].as_str().unwrap_or_default().to_string(),
            license: repo_meta.and_then(|m| m.license),
        })
    }
}
