//! Benchmark records: pull requests, task instances, predictions, accuracy,
//! and the dataset funnel.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::behavior::{classify, BehaviorCounts, BehaviorMap, TestBehavior, TestStatus};
use crate::date::Date;
use crate::diff::is_test_file;
use crate::pinning::CommandSet;
use crate::report::FrameworkId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRef {
    pub number: u64,
    pub title: String,
    pub body: String,
    pub created_at: String,
}

impl IssueRef {
    pub fn problem_statement(&self) -> String {
        let body = self.body.trim();
        if body.is_empty() {
            format!("{}\n", self.title.trim())
        } else {
            format!("{}\n{}\n", self.title.trim(), body)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRecord {
    pub repo: String,
    pub number: u64,
    pub merged: bool,
    pub merged_at: Option<String>,
    pub created_at: String,
    pub linked_issue: Option<IssueRef>,
    pub files_changed: Vec<String>,
    pub diff: String,
    pub base_commit: String,
    pub license: Option<String>,
}

/// Merged, linked to an issue, and touching at least one test file.
pub fn is_valid_pr(pr: &PullRecord) -> bool {
    pr.merged && pr.merged_at.is_some() && pr.linked_issue.is_some() && pr.files_changed.iter().any(|f| is_test_file(f))
}

/// Pinning cutoff: the linked issue's creation date, else the PR's.
pub fn cutoff_date(pr: &PullRecord) -> Option<Date> {
    pr.linked_issue
        .as_ref()
        .and_then(|i| Date::parse_prefix(&i.created_at).ok())
        .or_else(|| Date::parse_prefix(&pr.created_at).ok())
}

pub const PERMISSIVE_LICENSES: &[&str] = &["MIT", "Apache-2.0", "BSD-2-Clause", "BSD-3-Clause", "ISC", "MPL-2.0"];

pub fn is_permissive(spdx: &str) -> bool {
    PERMISSIVE_LICENSES.iter().any(|l| l.eq_ignore_ascii_case(spdx.trim()))
}

/// `org/repo` + PR number → `org__repo-number`.
pub fn instance_id(repo: &str, number: u64) -> String {
    format!("{}-{}", repo.replacen('/', "__", 1), number)
}

const CLOSING_KEYWORDS: &[&str] = &[
    "close", "closes", "closed", "fix", "fixes", "fixed", "resolve", "resolves", "resolved",
];

fn leading_number(s: &str) -> Option<u64> {
    let digits: String = s.chars().take_while(char::is_ascii_digit).collect();
    if digits.is_empty() || s[digits.len()..].starts_with(|c: char| c.is_alphanumeric() || c == '_') {
        return None;
    }
    digits.parse().ok()
}

/// Issue numbers of `repo` referenced with a closing keyword, e.g.
/// `fixes #12`, `Closes: org/repo#3`, or a full issue URL.
pub fn closing_references(text: &str, repo: &str) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let words: Vec<&str> = text.split_whitespace().collect();
    for pair in words.windows(2) {
        let kw = pair[0].trim_end_matches(':').to_ascii_lowercase();
        if !CLOSING_KEYWORDS.contains(&kw.as_str()) {
            continue;
        }
        let target = pair[1].trim_start_matches(['(', '[']);
        let number = if let Some(n) = target.strip_prefix('#') {
            leading_number(n)
        } else if let Some((r, n)) = target.split_once('#') {
            if r.eq_ignore_ascii_case(repo) {
                leading_number(n)
            } else {
                None
            }
        } else {
            let prefix = format!("https://github.com/{repo}/issues/");
            target
                .get(..prefix.len())
                .filter(|p| p.eq_ignore_ascii_case(&prefix))
                .and_then(|_| leading_number(&target[prefix.len()..]))
        };
        if let Some(n) = number {
            if !out.contains(&n) {
                out.push(n);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub image: String,
    pub cmds: CommandSet,
    pub parser: FrameworkId,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebaseSize {
    pub files: u64,
    pub lines: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoInfo {
    pub stars: Option<u64>,
    pub created_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub instance_id: String,
    pub repo: String,
    pub base_commit: String,
    pub patch: String,
    pub test_patch: String,
    pub problem_statement: String,
    pub created_at: String,
    #[serde(rename = "FAIL_TO_PASS")]
    pub fail_to_pass: Vec<String>,
    #[serde(rename = "PASS_TO_PASS")]
    pub pass_to_pass: Vec<String>,
    pub version: String,
    pub environment: Environment,
    #[serde(default)]
    pub reference_counts: BehaviorCounts,
    #[serde(default)]
    pub codebase: CodebaseSize,
    #[serde(default)]
    pub repo_info: RepoInfo,
    /// Seconds the reference test run took at build time.
    #[serde(default)]
    pub test_seconds: f64,
}

impl TaskInstance {
    /// Reference behaviors restricted to the two recorded lists.
    pub fn reference_map(&self) -> BehaviorMap {
        self.fail_to_pass
            .iter()
            .map(|id| (id.as_str(), TestBehavior::FAIL_TO_PASS))
            .chain(
                self.pass_to_pass
                    .iter()
                    .map(|id| (id.as_str(), TestBehavior::PASS_TO_PASS)),
            )
            .collect()
    }

    /// Candidate behaviors from a post-patch run, using the recorded
    /// pre-statuses. Tests missing from the run count as failing.
    pub fn candidate_map(&self, post: &BTreeMap<String, TestStatus>) -> BehaviorMap {
        let status = |id: &str| post.get(id).copied().unwrap_or(TestStatus::Fail);
        self.fail_to_pass
            .iter()
            .map(|id| (id.as_str(), TestBehavior::new(TestStatus::Fail, status(id))))
            .chain(
                self.pass_to_pass
                    .iter()
                    .map(|id| (id.as_str(), TestBehavior::new(TestStatus::Pass, status(id)))),
            )
            .collect()
    }
}

/// Joins a pre-patch and a post-patch run. Tests missing on either side
/// count as failing there, so newly added tests enter as failing before.
pub fn join_runs(pre: &BTreeMap<String, TestStatus>, post: &BTreeMap<String, TestStatus>) -> BehaviorMap {
    let status = |m: &BTreeMap<String, TestStatus>, id: &str| m.get(id).copied().unwrap_or(TestStatus::Fail);
    pre.keys()
        .chain(post.keys())
        .map(|id| (id.as_str(), TestBehavior::new(status(pre, id), status(post, id))))
        .collect()
}

/// Splits reference behaviors into the FAIL_TO_PASS and PASS_TO_PASS lists.
pub fn instance_lists(map: &BehaviorMap) -> (Vec<String>, Vec<String>, BehaviorCounts) {
    let f2p = map
        .ids_with(TestBehavior::FAIL_TO_PASS)
        .map(ToString::to_string)
        .collect();
    let p2p = map
        .ids_with(TestBehavior::PASS_TO_PASS)
        .map(ToString::to_string)
        .collect();
    (f2p, p2p, classify(map))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    pub model_patch: String,
    #[serde(default)]
    pub model_name_or_path: String,
}

/// Keeps the last prediction per instance; returns the ids that had
/// duplicates.
pub fn dedupe_predictions(preds: Vec<Prediction>) -> (BTreeMap<String, Prediction>, Vec<String>) {
    let mut map: BTreeMap<String, Prediction> = BTreeMap::new();
    let mut dups: Vec<String> = Vec::new();
    for p in preds {
        let id = p.instance_id.clone();
        if map.insert(id.clone(), p).is_some() && !dups.contains(&id) {
            dups.push(id);
        }
    }
    (map, dups)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub total: u64,
    pub resolved: u64,
    /// Percentage of resolved instances.
    pub accuracy: f64,
}

impl Accuracy {
    fn record(&mut self, resolved: bool) {
        self.total += 1;
        self.resolved += u64::from(resolved);
        self.accuracy = 100.0 * self.resolved as f64 / self.total as f64;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: Accuracy,
    pub per_repo: BTreeMap<String, Accuracy>,
}

/// Aggregates `(repo, resolved)` outcomes, one per dataset instance.
pub fn accuracy<'a>(outcomes: impl IntoIterator<Item = (&'a str, bool)>) -> AccuracyReport {
    let mut report = AccuracyReport::default();
    for (repo, resolved) in outcomes {
        report.overall.record(resolved);
        report.per_repo.entry(repo.to_string()).or_default().record(resolved);
    }
    report
}

pub const FUNNEL_STAGES: &[&str] = &[
    "initial_projects",
    "repo_found",
    "preprocessing",
    "permissive_license",
    "has_valid_pr",
    "setup_succeeds",
    "valid_prs_collected",
    "pr_setup_succeeds",
    "valid_instances",
];

/// Stage counters. The first six count repositories, the last three count
/// pull requests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub stages: Vec<FunnelStage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelStage {
    pub name: String,
    pub count: u64,
}

impl Default for Funnel {
    fn default() -> Self {
        Funnel {
            stages: FUNNEL_STAGES
                .iter()
                .map(|n| FunnelStage {
                    name: n.to_string(),
                    count: 0,
                })
                .collect(),
        }
    }
}

impl Funnel {
    pub fn bump(&mut self, stage: &str, by: u64) {
        if let Some(s) = self.stages.iter_mut().find(|s| s.name == stage) {
            s.count += by;
        }
    }

    pub fn get(&self, stage: &str) -> u64 {
        self.stages.iter().find(|s| s.name == stage).map_or(0, |s| s.count)
    }

    pub fn merge(&mut self, other: &Funnel) {
        for s in &other.stages {
            self.bump(&s.name, s.count);
        }
    }

    /// Counters never grow from one stage to the next within the repository
    /// stages and within the pull-request stages.
    pub fn is_monotone(&self) -> bool {
        let counts: Vec<u64> = self.stages.iter().map(|s| s.count).collect();
        counts[..6].windows(2).all(|w| w[0] >= w[1]) && counts[6..].windows(2).all(|w| w[0] >= w[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pr() -> PullRecord {
        PullRecord {
            repo: "o/r".into(),
            number: 7,
            merged: true,
            merged_at: Some("2023-05-02T00:00:00Z".into()),
            created_at: "2023-05-01T00:00:00Z".into(),
            linked_issue: Some(IssueRef {
                number: 3,
                title: "Bug".into(),
                body: "It breaks".into(),
                created_at: "2023-04-20T00:00:00Z".into(),
            }),
            files_changed: vec!["src/a.py".into(), "tests/test_x.py".into()],
            diff: String::new(),
            base_commit: "abc".into(),
            license: Some("MIT".into()),
        }
    }

    #[test]
    fn valid_pr_predicate() {
        assert!(is_valid_pr(&pr()));
        let mut p = pr();
        p.files_changed = vec!["src/a.py".into()];
        assert!(!is_valid_pr(&p));
        let mut p = pr();
        p.merged = false;
        p.merged_at = None;
        assert!(!is_valid_pr(&p));
        let mut p = pr();
        p.linked_issue = None;
        assert!(!is_valid_pr(&p));
        assert_eq!(cutoff_date(&pr()).unwrap().to_string(), "2023-04-20");
    }

    #[test]
    fn ids_and_links() {
        assert_eq!(instance_id("org/repo", 12), "org__repo-12");
        assert_eq!(
            closing_references("Fixes #12 and closes: o/r#3, see #4", "o/r"),
            [12, 3]
        );
        assert_eq!(
            closing_references("resolves https://github.com/o/r/issues/9.", "o/r"),
            [9]
        );
        assert!(closing_references("fixes other/r#2 and #5abc", "o/r").is_empty());
    }

    #[test]
    fn runs_join_with_absent_tests_failing() {
        let pre: BTreeMap<String, TestStatus> = [("a".to_string(), TestStatus::Pass)].into();
        let post: BTreeMap<String, TestStatus> = [
            ("a".to_string(), TestStatus::Pass),
            ("new".to_string(), TestStatus::Pass),
        ]
        .into();
        let m = join_runs(&pre, &post);
        assert_eq!(m.get("new"), Some(TestBehavior::FAIL_TO_PASS));
        assert_eq!(m.get("a"), Some(TestBehavior::PASS_TO_PASS));
        let (f2p, p2p, counts) = instance_lists(&m);
        assert_eq!((f2p, p2p), (vec!["new".to_string()], vec!["a".to_string()]));
        assert_eq!(counts.fail_to_pass, 1);
    }

    #[test]
    fn accuracy_and_dedupe() {
        let outcomes: Vec<(&str, bool)> = (0..10).map(|i| ("o/r", i < 3)).collect();
        let r = accuracy(outcomes);
        assert_eq!(r.overall.accuracy, 30.0);
        assert_eq!(accuracy([]).overall.accuracy, 0.0);
        let p = |id: &str, patch: &str| Prediction {
            instance_id: id.into(),
            model_patch: patch.into(),
            model_name_or_path: "m".into(),
        };
        let (map, dups) = dedupe_predictions(vec![p("a", "1"), p("b", "x"), p("a", "2")]);
        assert_eq!(map["a"].model_patch, "2");
        assert_eq!(dups, ["a"]);
    }

    #[test]
    fn funnel_monotonicity() {
        let mut f = Funnel::default();
        for (i, s) in FUNNEL_STAGES.iter().enumerate().take(6) {
            f.bump(s, 6 - i as u64);
        }
        f.bump("valid_prs_collected", 4);
        f.bump("pr_setup_succeeds", 3);
        f.bump("valid_instances", 2);
        assert!(f.is_monotone());
        f.bump("valid_instances", 5);
        assert!(!f.is_monotone());
    }
}
