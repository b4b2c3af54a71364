//! Patched test runs on restored environments, and candidate evaluation.

use std::collections::BTreeMap;
use std::time::Duration;

use benchgen_core::behavior::{is_resolved, BehaviorMap};
use benchgen_core::dataset::{accuracy, dedupe_predictions, AccuracyReport, Prediction, TaskInstance};
use benchgen_core::report::{ReportError, TestReport};
use serde::{Deserialize, Serialize};

use crate::sandbox::{apply_patch, ExecOptions, Runtime, SandboxError, SandboxSpec};
use crate::validation::{parse_runs, run_test_commands};

/// Smallest per-command timeout used for evaluation runs.
pub const MIN_EVAL_TIMEOUT: Duration = Duration::from_secs(60);
/// Margin applied to the test time observed at build.
pub const EVAL_TIMEOUT_FACTOR: f64 = 3.0;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("patch {name} does not apply: {message}")]
    PatchApply { name: String, message: String },
    #[error("test run produced no usable report: {0}")]
    Report(#[from] ReportError),
    #[error("test command timed out: {0}")]
    Timeout(String),
    #[error(transparent)]
    Sandbox(SandboxError),
}

impl From<SandboxError> for HarnessError {
    fn from(e: SandboxError) -> Self {
        HarnessError::Sandbox(e)
    }
}

/// Restores `image`, applies `patches` in order, runs `test`, and parses
/// the merged report. Returns the report with the total test time.
pub fn run_patched(
    runtime: &dyn Runtime,
    image: &str,
    spec: &SandboxSpec,
    patches: &[(&str, &str)],
    test: &[String],
    opts: ExecOptions,
) -> Result<(TestReport, f64), HarnessError> {
    let mut sandbox = runtime.restore(image, spec)?;
    for (name, patch) in patches {
        apply_patch(sandbox.as_mut(), patch, name).map_err(|e| match e {
            SandboxError::PatchApply(message) => HarnessError::PatchApply {
                name: name.to_string(),
                message,
            },
            other => HarnessError::Sandbox(other),
        })?;
    }
    let runs = run_test_commands(sandbox.as_mut(), test, opts)?;
    if let Some(t) = runs.iter().find(|r| r.timed_out) {
        return Err(HarnessError::Timeout(t.command.clone()));
    }
    let seconds = runs.iter().map(|r| r.duration_secs).sum();
    Ok((parse_runs(&runs)?, seconds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub instance_id: String,
    pub repo: String,
    pub resolved: bool,
    pub behaviors: BehaviorMap,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub accuracy: AccuracyReport,
    pub results: Vec<EvalResult>,
    /// Prediction ids that appeared more than once; the last one was used.
    pub duplicate_predictions: Vec<String>,
    /// Prediction ids naming no dataset instance.
    pub unknown_predictions: Vec<String>,
}

pub struct Evaluator<'a> {
    pub runtime: &'a dyn Runtime,
    /// Template spec; the interpreter version comes from each instance.
    pub spec: SandboxSpec,
    pub network: bool,
}

impl Evaluator<'_> {
    pub fn timeout_for(instance: &TaskInstance) -> Duration {
        let observed = Duration::from_secs_f64((instance.test_seconds * EVAL_TIMEOUT_FACTOR).max(0.0));
        observed.max(MIN_EVAL_TIMEOUT)
    }

    pub fn evaluate_one(&self, instance: &TaskInstance, pred: &Prediction) -> EvalResult {
        let spec = SandboxSpec {
            python_version: instance.environment.cmds.python_version.clone(),
            ..self.spec.clone()
        };
        let opts = ExecOptions {
            timeout: Self::timeout_for(instance),
            network: self.network,
        };
        let run = run_patched(
            self.runtime,
            &instance.environment.image,
            &spec,
            &[("test_patch", &instance.test_patch), ("model_patch", &pred.model_patch)],
            &instance.environment.cmds.test,
            opts,
        );
        let mut result = EvalResult {
            instance_id: instance.instance_id.clone(),
            repo: instance.repo.clone(),
            resolved: false,
            behaviors: BehaviorMap::new(),
            failure: None,
        };
        match run {
            Ok((report, _)) => {
                let candidate = instance.candidate_map(&report.results);
                match is_resolved(&instance.reference_map(), &candidate) {
                    Ok(r) => result.resolved = r,
                    Err(e) => result.failure = Some(e.to_string()),
                }
                result.behaviors = candidate;
            }
            Err(e) => result.failure = Some(e.to_string()),
        }
        result
    }

    /// Evaluates every instance on `workers` threads. Instances without a
    /// prediction count as unresolved.
    pub fn evaluate_all(&self, dataset: &[TaskInstance], predictions: Vec<Prediction>, workers: usize) -> EvalReport {
        let (preds, duplicates) = dedupe_predictions(predictions);
        for id in &duplicates {
            tracing::warn!(instance = %id, "duplicate prediction, keeping the last one");
        }
        let known: BTreeMap<&str, ()> = dataset.iter().map(|i| (i.instance_id.as_str(), ())).collect();
        let unknown: Vec<String> = preds
            .keys()
            .filter(|k| !known.contains_key(k.as_str()))
            .cloned()
            .collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots: Vec<std::sync::Mutex<Option<EvalResult>>> =
            dataset.iter().map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers.max(1).min(dataset.len().max(1)) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let Some(instance) = dataset.get(i) else { break };
                    let res = match preds.get(&instance.instance_id) {
                        Some(p) => self.evaluate_one(instance, p),
                        None => EvalResult {
                            instance_id: instance.instance_id.clone(),
                            repo: instance.repo.clone(),
                            resolved: false,
                            behaviors: BehaviorMap::new(),
                            failure: Some("no prediction".into()),
                        },
                    };
                    tracing::info!(instance = %res.instance_id, resolved = res.resolved, "evaluated");
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(res);
                });
            }
        });
        let results: Vec<EvalResult> = slots
            .into_iter()
            .filter_map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()))
            .collect();
        EvalReport {
            accuracy: accuracy(results.iter().map(|r| (r.repo.as_str(), r.resolved))),
            results,
            duplicate_predictions: duplicates,
            unknown_predictions: unknown,
        }
    }
}
