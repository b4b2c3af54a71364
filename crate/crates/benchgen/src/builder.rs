//! Dataset construction: repository funnel, pull-request collection,
//! per-commit environment setup, reference behaviors, and instance emission.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use benchgen_core::behavior::BehaviorMap;
use benchgen_core::dataset::{
    cutoff_date, instance_id, instance_lists, is_permissive, is_valid_pr, join_runs, Environment, Funnel, Prediction,
    PullRecord, RepoInfo, TaskInstance,
};
use benchgen_core::diff::split_patch;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentError};
use crate::forge::{canonical_repo, Forge, ForgeError, RepoMeta};
use crate::harness::{run_patched, Evaluator, HarnessError};
use crate::repo::Mirror;
use crate::sandbox::{ExecOptions, SandboxSpec};
use crate::validation::SetupOutcome;

const PAGE_SIZE: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildSettings {
    pub n_per_repo: usize,
    pub scan_cap: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub repo: String,
    pub pull: Option<u64>,
    pub stage: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub funnel: Funnel,
    pub instances: Vec<TaskInstance>,
    pub failures: Vec<Failure>,
}

/// Walks closed pull requests newest first and keeps valid ones, stopping
/// after `n` valid records or `scan_cap` scanned pull requests.
pub fn collect_prs(forge: &dyn Forge, repo: &str, n: usize, scan_cap: usize) -> Result<Vec<PullRecord>, ForgeError> {
    let mut out = Vec::new();
    let mut scanned = 0usize;
    let mut page = 1;
    while out.len() < n && scanned < scan_cap {
        let per_page = PAGE_SIZE.min((scan_cap - scanned) as u32);
        let pulls = forge.list_pulls(repo, page, per_page)?;
        if pulls.is_empty() {
            break;
        }
        for p in pulls {
            if out.len() >= n || scanned >= scan_cap {
                break;
            }
            scanned += 1;
            if !p.merged {
                continue;
            }
            let record = forge.pull_record(repo, p.number)?;
            if is_valid_pr(&record) {
                out.push(record);
            }
        }
        page += 1;
    }
    Ok(out)
}

/// Runs the tests before and after the code patch, both with the test patch
/// applied, on fresh restores of `image`.
pub fn compute_reference_behaviors(
    agent: &Agent<'_>,
    image: &str,
    spec: &SandboxSpec,
    test: &[String],
    code_patch: &str,
    test_patch: &str,
    opts: ExecOptions,
) -> Result<(BehaviorMap, f64), HarnessError> {
    let (pre, _) = run_patched(agent.runtime, image, spec, &[("test_patch", test_patch)], test, opts)?;
    let (post, seconds) = run_patched(
        agent.runtime,
        image,
        spec,
        &[("test_patch", test_patch), ("code_patch", code_patch)],
        test,
        opts,
    )?;
    Ok((join_runs(&pre.results, &post.results), seconds))
}

pub struct Builder<'a> {
    pub forge: &'a dyn Forge,
    pub agent: Agent<'a>,
    pub settings: BuildSettings,
}

struct RepoRun {
    funnel: Funnel,
    instances: Vec<TaskInstance>,
    failures: Vec<Failure>,
}

impl RepoRun {
    fn fail(&mut self, repo: &str, pull: Option<u64>, stage: &str, reason: impl Into<String>) {
        let reason = reason.into();
        tracing::info!(repo, pull, stage, reason = %reason, "dropped");
        self.failures.push(Failure {
            repo: repo.to_string(),
            pull,
            stage: stage.to_string(),
            reason,
        });
    }
}

fn describe(outcome: &SetupOutcome) -> String {
    match outcome.rejection_reason {
        Some(r) if outcome.detail.is_empty() => r.to_string(),
        Some(r) => format!("{r}: {}", outcome.detail),
        None => "rejected".into(),
    }
}

impl Builder<'_> {
    /// Runs the funnel over a repository list. Per-repository failures are
    /// recorded in the report and never abort the run.
    pub fn build(&self, entries: &[String]) -> BuildReport {
        let mut funnel = Funnel::default();
        let mut failures = Vec::new();
        let entries: Vec<&String> = entries
            .iter()
            .filter(|e| !e.trim().is_empty() && !e.trim().starts_with('#'))
            .collect();
        funnel.bump("initial_projects", entries.len() as u64);
        let mut found: Vec<RepoMeta> = Vec::new();
        for entry in entries {
            let meta = canonical_repo(entry)
                .ok_or_else(|| ForgeError::NotFound(entry.to_string()))
                .and_then(|name| self.forge.repo(&name));
            match meta {
                Ok(m) => {
                    funnel.bump("repo_found", 1);
                    if found.iter().any(|f| f.full_name == m.full_name) {
                        failures.push(Failure {
                            repo: m.full_name,
                            pull: None,
                            stage: "preprocessing".into(),
                            reason: format!("duplicate entry {entry}"),
                        });
                    } else {
                        found.push(m);
                    }
                }
                Err(e) => failures.push(Failure {
                    repo: entry.trim().to_string(),
                    pull: None,
                    stage: "repo_found".into(),
                    reason: e.to_string(),
                }),
            }
        }
        funnel.bump("preprocessing", found.len() as u64);

        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<RepoRun>>> = found.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..self.settings.workers.max(1).min(found.len().max(1)) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(meta) = found.get(i) else { break };
                    let run = self.build_repo(meta);
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(run);
                });
            }
        });
        let mut instances = Vec::new();
        for run in slots
            .into_iter()
            .filter_map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()))
        {
            funnel.merge(&run.funnel);
            instances.extend(run.instances);
            failures.extend(run.failures);
        }
        instances.sort_by(|a: &TaskInstance, b| a.instance_id.cmp(&b.instance_id));
        BuildReport {
            funnel,
            instances,
            failures,
        }
    }

    fn build_repo(&self, meta: &RepoMeta) -> RepoRun {
        let repo = meta.full_name.as_str();
        let mut run = RepoRun {
            funnel: Funnel::default(),
            instances: Vec::new(),
            failures: Vec::new(),
        };
        match meta.license.as_deref() {
            Some(l) if is_permissive(l) => run.funnel.bump("permissive_license", 1),
            other => {
                run.fail(
                    repo,
                    None,
                    "permissive_license",
                    format!("license {}", other.unwrap_or("unknown")),
                );
                return run;
            }
        }
        let prs = match collect_prs(self.forge, repo, self.settings.n_per_repo, self.settings.scan_cap) {
            Ok(p) if !p.is_empty() => p,
            Ok(_) => {
                run.fail(repo, None, "has_valid_pr", "no valid pull request");
                return run;
            }
            Err(e) => {
                run.fail(repo, None, "has_valid_pr", e.to_string());
                return run;
            }
        };
        run.funnel.bump("has_valid_pr", 1);
        let mirror = match Mirror::clone_from(&meta.clone_url) {
            Ok(m) => m,
            Err(e) => {
                run.fail(repo, None, "setup_succeeds", e.to_string());
                return run;
            }
        };
        let mut outcomes: BTreeMap<u64, SetupOutcome> = BTreeMap::new();
        let newest = &prs[0];
        match self.setup_pr(&mirror, newest) {
            Ok(o) if o.accepted => {
                run.funnel.bump("setup_succeeds", 1);
                outcomes.insert(newest.number, o);
            }
            Ok(o) => {
                run.fail(repo, Some(newest.number), "setup_succeeds", describe(&o));
                return run;
            }
            Err(e) => {
                run.fail(repo, Some(newest.number), "setup_succeeds", e);
                return run;
            }
        }
        run.funnel.bump("valid_prs_collected", prs.len() as u64);
        for pr in &prs {
            let outcome = match outcomes.remove(&pr.number) {
                Some(o) => o,
                None => match self.setup_pr(&mirror, pr) {
                    Ok(o) if o.accepted => o,
                    Ok(o) => {
                        run.fail(repo, Some(pr.number), "pr_setup_succeeds", describe(&o));
                        continue;
                    }
                    Err(e) => {
                        run.fail(repo, Some(pr.number), "pr_setup_succeeds", e);
                        continue;
                    }
                },
            };
            run.funnel.bump("pr_setup_succeeds", 1);
            match self.make_instance(&mirror, meta, pr, outcome) {
                Ok(instance) => {
                    run.funnel.bump("valid_instances", 1);
                    run.instances.push(instance);
                }
                Err(reason) => run.fail(repo, Some(pr.number), "valid_instances", reason),
            }
        }
        run
    }

    fn setup_pr(&self, mirror: &Mirror, pr: &PullRecord) -> Result<SetupOutcome, String> {
        let cutoff = cutoff_date(pr).ok_or_else(|| format!("{}#{} has no usable date", pr.repo, pr.number))?;
        self.agent
            .setup(mirror, &pr.repo, &pr.base_commit, cutoff)
            .map_err(|e: AgentError| e.to_string())
    }

    fn make_instance(
        &self,
        mirror: &Mirror,
        meta: &RepoMeta,
        pr: &PullRecord,
        outcome: SetupOutcome,
    ) -> Result<TaskInstance, String> {
        let (code_patch, test_patch) = split_patch(&pr.diff).map_err(|e| e.to_string())?;
        if code_patch.trim().is_empty() {
            return Err("pull request changes only test files".into());
        }
        let image = outcome.image.clone().ok_or("accepted environment has no image")?;
        let parser = outcome.parser.ok_or("accepted environment has no parser")?;
        let spec = SandboxSpec {
            python_version: outcome.cmds.python_version.clone(),
            ..self.agent.settings.spec.clone()
        };
        let opts = self.agent.settings.test_opts();
        let (behaviors, seconds) = compute_reference_behaviors(
            &self.agent,
            &image,
            &spec,
            &outcome.cmds.test,
            &code_patch,
            &test_patch,
            opts,
        )
        .map_err(|e| e.to_string())?;
        let (f2p, p2p, counts) = instance_lists(&behaviors);
        if f2p.is_empty() {
            return Err("no FAIL_TO_PASS test".into());
        }
        let issue = pr.linked_issue.as_ref().ok_or("no linked issue")?;
        let instance = TaskInstance {
            instance_id: instance_id(&pr.repo, pr.number),
            repo: pr.repo.clone(),
            base_commit: pr.base_commit.clone(),
            patch: code_patch,
            test_patch,
            problem_statement: issue.problem_statement(),
            created_at: pr.created_at.clone(),
            fail_to_pass: f2p,
            pass_to_pass: p2p,
            version: pr.base_commit.chars().take(12).collect(),
            environment: Environment {
                image,
                cmds: outcome.cmds,
                parser,
            },
            reference_counts: counts,
            codebase: mirror.codebase_size(&pr.base_commit).unwrap_or_default(),
            repo_info: RepoInfo {
                stars: meta.stars,
                created_at: meta.created_at.clone(),
            },
            test_seconds: seconds,
        };
        let evaluator = Evaluator {
            runtime: self.agent.runtime,
            spec: self.agent.settings.spec.clone(),
            network: self.agent.settings.network_during_tests,
        };
        let gold = Prediction {
            instance_id: instance.instance_id.clone(),
            model_patch: instance.patch.clone(),
            model_name_or_path: "gold".into(),
        };
        let check = evaluator.evaluate_one(&instance, &gold);
        if !check.resolved {
            return Err(format!(
                "reference patch does not resolve its instance: {}",
                check.failure.unwrap_or_default()
            ));
        }
        Ok(instance)
    }
}
