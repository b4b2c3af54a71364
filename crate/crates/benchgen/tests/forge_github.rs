mod common;

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::Duration;

use benchgen::forge::{Forge, ForgeError, GithubForge};
use common::{fake_http, FakeReply};

const DIFF: &str = "diff --git a/calc/ops.py b/calc/ops.py\n--- a/calc/ops.py\n+++ b/calc/ops.py\n@@ -1 +1 @@\n-    return a // b\n+    return a / b\ndiff --git a/tests/test_ops.py b/tests/test_ops.py\n--- a/tests/test_ops.py\n+++ b/tests/test_ops.py\n@@ -1 +1,2 @@\n x\n+y\n";

#[test]
fn pull_record_with_linked_issue_and_conditional_requests() {
    let repo_hits = Arc::new(AtomicU32::new(0));
    let revalidated = Arc::new(AtomicU32::new(0));
    let (rh, rv) = (repo_hits.clone(), revalidated.clone());
    let base = fake_http(move |req| {
        let p = req.path.as_str();
        if p == "/repos/toy/calc" {
            rh.fetch_add(1, Ordering::SeqCst);
            if req.header("if-none-match") == Some("\"v1\"") {
                rv.fetch_add(1, Ordering::SeqCst);
                return FakeReply::json(304, "");
            }
            return FakeReply::json(200, r#"{"full_name":"toy/calc","clone_url":"https://example.org/toy/calc.git","license":{"spdx_id":"MIT"},"stargazers_count":42,"created_at":"2021-06-01T00:00:00Z"}"#)
                .with("ETag", "\"v1\"");
        }
        if p.starts_with("/repos/toy/calc/pulls?") {
            assert!(p.contains("state=closed") && p.contains("direction=desc"));
            return FakeReply::json(
                200,
                r#"[{"number":4,"merged_at":null},{"number":2,"merged_at":"2022-03-03T00:00:00Z"}]"#,
            );
        }
        if p.starts_with("/repos/toy/calc/pulls/2/files") {
            return FakeReply::json(200, r#"[{"filename":"calc/ops.py"},{"filename":"tests/test_ops.py"}]"#);
        }
        if p == "/repos/toy/calc/pulls/2" {
            if req.header("accept") == Some("application/vnd.github.v3.diff") {
                return FakeReply::json(200, DIFF);
            }
            return FakeReply::json(
                200,
                r#"{"number":2,"title":"Use true division","body":"Fixes #1.","merged":true,"merged_at":"2022-03-03T00:00:00Z","created_at":"2022-03-02T00:00:00Z","base":{"sha":"abc123"}}"#,
            );
        }
        if p == "/repos/toy/calc/issues/1" {
            return FakeReply::json(
                200,
                r#"{"number":1,"title":"divide floors","body":"7/2 gives 3","created_at":"2022-03-01T08:00:00Z"}"#,
            );
        }
        FakeReply::json(404, r#"{"message":"Not Found"}"#)
    });
    let gh = GithubForge::new(&base, Some("tok".into()));
    let meta = gh.repo("toy/calc").unwrap();
    assert_eq!((meta.license.as_deref(), meta.stars), (Some("MIT"), Some(42)));
    let pulls = gh.list_pulls("toy/calc", 1, 100).unwrap();
    assert_eq!(
        pulls.iter().map(|p| (p.number, p.merged)).collect::<Vec<_>>(),
        [(4, false), (2, true)]
    );

    let pr = gh.pull_record("toy/calc", 2).unwrap();
    assert!(pr.merged);
    assert_eq!(pr.base_commit, "abc123");
    assert_eq!(pr.files_changed, ["calc/ops.py", "tests/test_ops.py"]);
    assert_eq!(pr.diff, DIFF);
    let issue = pr.linked_issue.unwrap();
    assert_eq!((issue.number, issue.created_at.as_str()), (1, "2022-03-01T08:00:00Z"));
    assert_eq!(pr.license.as_deref(), Some("MIT"));
    assert!(
        revalidated.load(Ordering::SeqCst) >= 1,
        "second repo lookup should be conditional"
    );

    assert!(matches!(gh.repo("toy/missing"), Err(ForgeError::NotFound(_))));
}

#[test]
fn rate_limits_back_off_then_surface() {
    let calls = Arc::new(AtomicU32::new(0));
    let c = calls.clone();
    let base = fake_http(move |req| {
        let n = c.fetch_add(1, Ordering::SeqCst);
        if req.path == "/repos/a/b" && n == 0 {
            return FakeReply::json(403, r#"{"message":"API rate limit exceeded"}"#).with("Retry-After", "1");
        }
        if req.path == "/repos/a/b" {
            return FakeReply::json(200, r#"{"full_name":"a/b"}"#);
        }
        FakeReply::json(429, "{}")
    });
    let gh = GithubForge::new(&base, None).with_max_wait(Duration::from_secs(5));
    assert_eq!(gh.repo("a/b").unwrap().full_name, "a/b");
    assert!(matches!(gh.repo("c/d"), Err(ForgeError::RateLimited(_))));
}
