//! Acceptance criteria, one pass/fail line each.
//!
//! Criteria 6, 7 and 9 replay committed model cassettes against the local
//! sandbox runtime, so they need `git` and a host `python3` with `pip` and
//! `pytest` but no network and no model endpoint.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use benchgen::agent::{Agent, AgentSettings};
use benchgen::builder::Failure;
use benchgen::config::{CassetteMode, Config, RuntimeKind};
use benchgen::fetch::MapFetcher;
use benchgen::harness::EvalReport;
use benchgen::improve::RepairAction;
use benchgen::llm::cassette::Cassette;
use benchgen::llm::gateway::Gateway;
use benchgen::llm::scripted::{Rule, ScriptedProvider};
use benchgen::repo::Mirror;
use benchgen::sandbox::local::LocalRuntime;
use benchgen::sandbox::{Runtime, Sandbox, SandboxError, SandboxSpec};
use benchgen::validation::{judge_success, ReferenceDb};
use benchgen_core::analytics::distribution::cdf;
use benchgen_core::analytics::{contamination_test, spearman};
use benchgen_core::behavior::{behavior_geq, is_resolved, BehaviorError, BehaviorMap};
use benchgen_core::dataset::{Funnel, TaskInstance, FUNNEL_STAGES};
use benchgen_core::report::{self, detect_and_parse, FrameworkId, SummaryCounts, TestReport};
use benchgen_core::threshold::{accept, RejectionReason, DEFAULT_MIN_PASS_RATE};
use benchgen_core::{pin_rewrite, Date, TestBehavior, TestStatus};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, RngAlgorithm, TestRng, TestRunner};
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        RunnerConfig {
            cases,
            failure_persistence: None,
            ..RunnerConfig::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn fixtures() -> PathBuf {
    common::fixtures()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_benchgen"))
}

// 1

fn contamination_reproduction() -> Outcome {
    let start = Instant::now();
    let p = contamination_test((35, 286), (18, 249)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (pb, pa) = (35.0 / 286.0, 18.0 / 249.0);
    let pooled = 53.0 / 535.0;
    let z = (pb - pa) / (pooled * (1.0 - pooled) * (1.0 / 286.0 + 1.0 / 249.0f64)).sqrt();
    let oracle = 1.0 - Normal::new(0.0, 1.0).unwrap().cdf(z);
    check((p - oracle).abs() < 1e-10, format!("p={p} oracle={oracle}"))?;
    check((0.024..=0.029).contains(&p), format!("p={p} outside [0.024, 0.029]"))?;
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("p={p:.5} (oracle {oracle:.5}) in {elapsed:?}"))
}

// 2

const FP: TestBehavior = TestBehavior::FAIL_TO_PASS;
const FF: TestBehavior = TestBehavior::FAIL_TO_FAIL;
const PP: TestBehavior = TestBehavior::PASS_TO_PASS;
const PF: TestBehavior = TestBehavior::PASS_TO_FAIL;
const ORDER: [TestBehavior; 4] = [FP, FF, PP, PF];

const TRUTH: [[bool; 4]; 4] = [
    [true, true, false, false],
    [false, true, false, false],
    [false, false, true, true],
    [false, false, false, true],
];

fn all_maps(n: usize) -> Vec<Vec<TestBehavior>> {
    (0..n).fold(vec![vec![]], |acc, _| {
        acc.into_iter()
            .flat_map(|m| ORDER.iter().map(move |b| [m.clone(), vec![*b]].concat()))
            .collect()
    })
}

fn as_map(bs: &[TestBehavior]) -> BehaviorMap {
    bs.iter().enumerate().map(|(i, b)| (format!("t{i}"), *b)).collect()
}

/// Resolved iff every reference test ends at least as well: same start,
/// and a pass wherever the reference passes.
fn resolved_by_status(reference: &[TestBehavior], candidate: &[TestBehavior]) -> bool {
    reference
        .iter()
        .zip(candidate)
        .all(|(r, c)| r.post == TestStatus::Fail || c.post == TestStatus::Pass)
}

fn resolution_semantics() -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for (i, a) in ORDER.iter().enumerate() {
        for (j, b) in ORDER.iter().enumerate() {
            if behavior_geq(*a, *b) != TRUTH[i][j] {
                mismatches.push(format!("geq({a}, {b})"));
            }
        }
    }
    let mut pairs = 0usize;
    for n in 0..=3 {
        let maps = all_maps(n);
        for reference in &maps {
            for candidate in &maps {
                let compatible = reference.iter().zip(candidate).all(|(r, c)| r.pre == c.pre);
                let got = is_resolved(&as_map(reference), &as_map(candidate));
                let ok = if compatible {
                    pairs += 1;
                    got == Ok(resolved_by_status(reference, candidate))
                } else {
                    matches!(got, Err(BehaviorError::PreStatusMismatch(_)))
                };
                if !ok {
                    mismatches.push(format!("{reference:?} vs {candidate:?}: {got:?}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches.is_empty(),
        format!("{} mismatches, first {:?}", mismatches.len(), mismatches.first()),
    )?;
    check(pairs == 1 + 8 + 64 + 512, format!("{pairs} compatible pairs"))?;
    check(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!(
        "16 order cells, {pairs} compatible pairs, 0 mismatches in {elapsed:?}"
    ))
}

// 3

fn large_transcript() -> String {
    let mut out = String::from("============================= test session starts ==============================\n");
    out.push_str("collected 2600 items\n\n");
    out.push_str("=========================== short test summary info ============================\n");
    for i in 0..2597 {
        out.push_str(&format!("PASSED tests/test_suite.py::test_case_{i}\n"));
    }
    for i in 0..3 {
        out.push_str(&format!(
            "FAILED tests/test_suite.py::test_broken_{i} - AssertionError\n"
        ));
    }
    out.push_str("===== 2597 passed, 3 failed in 10.85s =====\n");
    out
}

fn counts(passed: u64, failed: u64) -> SummaryCounts {
    SummaryCounts {
        passed,
        failed,
        errored: 0,
        skipped: 0,
    }
}

fn validation_threshold() -> Outcome {
    let transcript = large_transcript();
    let judge = Gateway::new(
        Arc::new(ScriptedProvider::new(vec![
            Rule {
                when: vec!["2597 passed, 3 failed".into()],
                reply: "YES".into(),
                times: None,
            },
            Rule {
                when: vec![],
                reply: "NO".into(),
                times: None,
            },
        ])),
        "fixture",
        0,
    );
    let judged = judge_success(&judge, "toy/project", &transcript).map_err(|e| e.to_string())?;
    check(judged, "judge rejected the transcript")?;
    let report = detect_and_parse(&transcript).map_err(|e| e.to_string())?;
    check(
        report.summary_counts == counts(2597, 3),
        format!("{:?}", report.summary_counts),
    )?;
    let verdict = accept(judged, Some(&report.summary_counts), DEFAULT_MIN_PASS_RATE);
    check(verdict.is_ok(), format!("large transcript: {verdict:?}"))?;
    let a = accept(true, Some(&counts(19, 1)), DEFAULT_MIN_PASS_RATE);
    check(a == Ok(0.95), format!("19/1: {a:?}"))?;
    let b = accept(true, Some(&counts(18, 2)), DEFAULT_MIN_PASS_RATE);
    check(b == Err(RejectionReason::BelowThreshold), format!("18/2: {b:?}"))?;
    let c = accept(true, Some(&counts(0, 0)), DEFAULT_MIN_PASS_RATE);
    check(c == Err(RejectionReason::NoTests), format!("0/0: {c:?}"))?;
    check(RejectionReason::NoTests.name() == "no_tests", "reason name")?;
    Ok(format!(
        "2597/3 accepted at {:.4}, 19/1 accepted, 18/2 below_threshold, 0/0 no_tests",
        verdict.unwrap()
    ))
}

// 4

fn test_id(framework: FrameworkId) -> BoxedStrategy<String> {
    match framework {
        FrameworkId::Unittest | FrameworkId::Nose => ("[a-z]{1,6}", "[A-Z][a-z]{0,6}", "[a-z0-9_]{1,8}")
            .prop_map(|(m, c, n)| format!("tests.test_{m}.{c}Tests.test_{n}"))
            .boxed(),
        _ => ("[a-z]{1,8}", "[a-z0-9_]{1,10}", proptest::option::of("[a-z0-9-]{1,6}"))
            .prop_map(|(f, n, p)| match p {
                Some(p) => format!("tests/test_{f}.py::test_{n}[{p}]"),
                None => format!("tests/test_{f}.py::test_{n}"),
            })
            .boxed(),
    }
}

fn synthetic_report(framework: FrameworkId) -> impl Strategy<Value = TestReport> {
    (
        proptest::collection::btree_map(test_id(framework), any::<bool>(), 0..40),
        0u64..5,
        any::<u64>(),
    )
        .prop_map(move |(m, skipped, split)| {
            let results: BTreeMap<String, TestStatus> = m
                .into_iter()
                .map(|(k, p)| (k, if p { TestStatus::Pass } else { TestStatus::Fail }))
                .collect();
            let passed = results.values().filter(|s| **s == TestStatus::Pass).count() as u64;
            let rest = results.len() as u64 - passed;
            let failed = if rest == 0 { 0 } else { split % (rest + 1) };
            TestReport {
                framework,
                results,
                summary_counts: SummaryCounts {
                    passed,
                    failed,
                    errored: rest - failed,
                    skipped,
                },
                raw_hash: String::new(),
            }
        })
}

fn parser_round_trip() -> Outcome {
    let mut total = 0;
    for framework in FrameworkId::ALL {
        let mut r = runner(200);
        let seen = AtomicUsize::new(0);
        r.run(&synthetic_report(framework), |rep| {
            seen.fetch_add(1, Ordering::Relaxed);
            let text = report::render(&rep);
            let parsed = report::parse(&text, framework).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(&parsed.results, &rep.results);
            prop_assert_eq!(parsed.summary_counts, rep.summary_counts);
            Ok(())
        })
        .map_err(|e| format!("{framework:?}: {e}"))?;
        let n = seen.load(Ordering::Relaxed);
        check(n >= 200, format!("{framework:?}: only {n} cases"))?;
        total += n;
    }
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/pytest_ra_calc.txt");
    let golden = std::fs::read_to_string(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
    let parsed = detect_and_parse(&golden).map_err(|e| e.to_string())?;
    let want: BTreeMap<String, TestStatus> = [
        ("tests/test_ops.py::test_add", TestStatus::Pass),
        ("tests/test_ops.py::test_subtract", TestStatus::Pass),
        ("tests/test_ops.py::test_multiply", TestStatus::Pass),
        ("tests/test_ops.py::test_divide_exact", TestStatus::Pass),
        ("tests/test_ops.py::test_divide_by_zero", TestStatus::Pass),
        ("tests/test_ops.py::test_divide_fraction", TestStatus::Fail),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    check(
        parsed.framework == FrameworkId::Pytest,
        format!("{:?}", parsed.framework),
    )?;
    check(parsed.results == want, format!("golden statuses {:?}", parsed.results))?;
    Ok(format!(
        "{total} synthetic reports over 4 frameworks, golden calc transcript exact"
    ))
}

// 5

fn simple_command() -> impl Strategy<Value = String> {
    let installer = prop::sample::select(vec!["pip", "pip3", "python -m pip", "python3.9 -m pip", "uv pip"]);
    let pkg = prop_oneof![
        "[a-z]{2,8}",
        "[a-z]{2,6}==[0-9]\\.[0-9]{1,2}",
        Just("-r requirements.txt".to_string()),
        Just("-e .[test]".to_string()),
    ];
    let stale = prop_oneof![
        Just(String::new()),
        (2015i32..2024, 1u8..13, 1u8..29).prop_map(|(y, m, d)| format!(" --exclude-newer {y:04}-{m:02}-{d:02}")),
        (2015i32..2024, 1u8..13, 1u8..29).prop_map(|(y, m, d)| format!(" --exclude-newer={y:04}-{m:02}-{d:02}")),
    ];
    prop_oneof![
        (installer, prop::collection::vec(pkg, 1..4), stale)
            .prop_map(|(i, p, s)| format!("{i} install {}{s}", p.join(" "))),
        Just("apt-get install -y graphviz".to_string()),
        Just("pytest -rA tests/".to_string()),
        Just("pip freeze".to_string()),
        "[a-z]{1,8}".prop_map(|w| format!("make {w}")),
    ]
}

const SEPARATORS: [&str; 4] = [" && ", " || ", " ; ", " | "];

fn command_list() -> impl Strategy<Value = Vec<String>> {
    let command = (
        simple_command(),
        prop::collection::vec((prop::sample::select(SEPARATORS.to_vec()), simple_command()), 0..3),
    )
        .prop_map(|(first, rest)| rest.into_iter().fold(first, |acc, (s, c)| acc + s + &c));
    prop::collection::vec(command, 1..6)
}

fn split_segments(cmd: &str) -> Vec<&str> {
    let mut parts = vec![cmd];
    for sep in SEPARATORS {
        parts = parts.into_iter().flat_map(|p| p.split(sep)).collect();
    }
    parts
}

fn is_install(segment: &str) -> bool {
    let w: Vec<&str> = segment.split_whitespace().collect();
    matches!(
        w.as_slice(),
        ["pip" | "pip3", "install", ..] | ["uv", "pip", "install", ..]
    ) || (w.len() > 3 && w[0].starts_with("python") && w[1] == "-m" && w[2] == "pip" && w[3] == "install")
}

fn pinning_invariant() -> Outcome {
    let mut r = runner(1000);
    let seen = AtomicUsize::new(0);
    let installs = AtomicUsize::new(0);
    let date = (2015i32..2026, 1u8..13, 1u8..29).prop_map(|(y, m, d)| Date::new(y, m, d).unwrap());
    r.run(&(command_list(), date), |(cmds, cutoff)| {
        seen.fetch_add(1, Ordering::Relaxed);
        let want = cutoff.to_string();
        for cmd in &cmds {
            let pinned = pin_rewrite(cmd, cutoff);
            prop_assert_eq!(pin_rewrite(&pinned, cutoff), pinned.clone());
            let before: Vec<&str> = split_segments(cmd);
            let after: Vec<&str> = split_segments(&pinned);
            prop_assert_eq!(before.len(), after.len());
            for (b, a) in before.iter().zip(&after) {
                if !is_install(b) {
                    let routed = b.strip_prefix("pip ").map(|rest| format!("uv pip {rest}"));
                    prop_assert!(a == b || routed.as_deref() == Some(*a), "{} -> {}", b, a);
                    continue;
                }
                installs.fetch_add(1, Ordering::Relaxed);
                let w: Vec<&str> = a.split_whitespace().collect();
                prop_assert!(w.starts_with(&["uv", "pip", "install"]), "{}", a);
                let flags: Vec<usize> = w
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.contains("--exclude-newer"))
                    .map(|(i, _)| i)
                    .collect();
                prop_assert_eq!(flags.len(), 1, "{}", a);
                prop_assert_eq!(w[flags[0]], "--exclude-newer");
                prop_assert_eq!(w.get(flags[0] + 1).copied(), Some(want.as_str()), "{}", a);
            }
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    let pinned = pin_rewrite("pip install -r requirements.txt", Date::new(2022, 4, 11).unwrap());
    check(
        pinned == "uv pip install -r requirements.txt --exclude-newer 2022-04-11",
        pinned.clone(),
    )?;
    let n = seen.load(Ordering::Relaxed);
    check(n >= 1000, format!("only {n} lists"))?;
    Ok(format!(
        "{n} command lists, {} install segments pinned once, idempotent",
        installs.load(Ordering::Relaxed)
    ))
}

// 6

fn run_ok(cmd: &mut Command) -> Result<std::process::Output, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    Ok(out)
}

fn replay_build(work: &Path, list: &Path, out: &str, extra: &[&str]) -> Result<(i32, PathBuf), String> {
    let f = fixtures();
    let dir = work.join(out);
    let mut cmd = bin();
    cmd.args(["--runtime", "local", "--log-level", "warn", "--workers", "4"])
        .arg("--local-root")
        .arg(work.join("images"))
        .arg("--forge-fixture")
        .arg(f.join("forge"))
        .arg("--cassette")
        .arg(f.join("llm/build.cassette.json"))
        .args(["--cassette-mode", "replay", "build", "--repos"])
        .arg(list)
        .arg("--out")
        .arg(&dir)
        .args(extra)
        .env_remove("LLM_API_KEY")
        .env("LLM_API_BASE", "http://127.0.0.1:9");
    let o = run_ok(&mut cmd)?;
    let code = o.status.code().unwrap_or(-1);
    if code == 2 {
        return Err(format!("build failed: {}", String::from_utf8_lossy(&o.stderr)));
    }
    Ok((code, dir))
}

fn read_dataset(path: &Path) -> Result<Vec<TaskInstance>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    text.lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect()
}

fn hermetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let list = work.path().join("repos.txt");
    std::fs::write(&list, "toy/calc\n").map_err(|e| e.to_string())?;
    let (code, dir) = replay_build(work.path(), &list, "build", &[])?;
    check(code == 0, format!("build exit {code}"))?;
    let instances = read_dataset(&dir.join("dataset.jsonl"))?;
    check(instances.len() == 1, format!("{} instances", instances.len()))?;
    let inst = &instances[0];
    check(!inst.fail_to_pass.is_empty(), "empty FAIL_TO_PASS")?;
    let preds: String = instances
        .iter()
        .map(|i| {
            serde_json::json!({"instance_id": i.instance_id, "model_patch": i.patch, "model_name_or_path": "gold"})
                .to_string()
                + "\n"
        })
        .collect();
    let pred_path = work.path().join("gold.jsonl");
    std::fs::write(&pred_path, preds).map_err(|e| e.to_string())?;
    let report_path = work.path().join("eval.json");
    let o = run_ok(
        bin()
            .args(["--runtime", "local", "--log-level", "warn", "evaluate", "--dataset"])
            .arg(dir.join("dataset.jsonl"))
            .arg("--predictions")
            .arg(&pred_path)
            .arg("--out")
            .arg(&report_path)
            .arg("--local-root")
            .arg(work.path().join("images")),
    )?;
    check(
        o.status.success(),
        format!("evaluate: {}", String::from_utf8_lossy(&o.stderr)),
    )?;
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(&report_path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let acc = report.accuracy.overall.accuracy;
    check((acc - 100.0).abs() < 1e-9, format!("accuracy {acc}"))?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(300), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} with FAIL_TO_PASS {:?}, gold accuracy {acc}% in {:.1}s",
        inst.instance_id,
        inst.fail_to_pass,
        elapsed.as_secs_f64()
    ))
}

// 7

const REPO_STAGES: usize = 6;

fn funnel_consistent(funnel: &Funnel, failures: &[Failure]) -> Result<(), String> {
    check(funnel.is_monotone(), format!("not monotone: {funnel:?}"))?;
    let names: Vec<&str> = funnel.stages.iter().map(|s| s.name.as_str()).collect();
    check(names == FUNNEL_STAGES, format!("stages {names:?}"))?;
    let dropped_at = |stage: &str| failures.iter().filter(|f| f.stage == stage).count() as u64;
    for w in FUNNEL_STAGES.windows(2) {
        let (prev, next) = (funnel.get(w[0]), funnel.get(w[1]));
        if w[1] == FUNNEL_STAGES[REPO_STAGES] {
            check(
                dropped_at(w[1]) == 0,
                format!("{} failures recorded at {}", dropped_at(w[1]), w[1]),
            )?;
            continue;
        }
        check(
            prev - next == dropped_at(w[1]),
            format!("{}→{}: {prev}-{next} != {} failures", w[0], w[1], dropped_at(w[1])),
        )?;
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?)
        .map_err(|e| e.to_string())
}

fn funnel_monotonicity() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let list = fixtures().join("forge/repos.txt");
    let (_, full) = replay_build(work.path(), &list, "full", &[])?;
    let (_, ablated) = replay_build(work.path(), &list, "ablated", &["--ablate", "no_iteration"])?;
    let mut counts = Vec::new();
    for dir in [&full, &ablated] {
        let funnel: Funnel = read_json(&dir.join("funnel.json"))?;
        let failures: Vec<Failure> = read_json(&dir.join("failures.json"))?;
        funnel_consistent(&funnel, &failures)?;
        let instances = read_dataset(&dir.join("dataset.jsonl"))?;
        check(
            instances.len() as u64 == funnel.get("valid_instances"),
            "dataset size differs from funnel",
        )?;
        counts.push((funnel, instances.len()));
    }
    let (f, n_full) = &counts[0];
    let n_ablated = counts[1].1;
    check(
        f.get("permissive_license") == 4,
        format!("{} repos passed the license stage", f.get("permissive_license")),
    )?;
    check(n_ablated <= *n_full, format!("ablated {n_ablated} > full {n_full}"))?;
    check(*n_full > 0, "no instances")?;
    let line: Vec<String> = f.stages.iter().map(|s| s.count.to_string()).collect();
    Ok(format!(
        "funnel {} ; no_iteration {n_ablated} <= full {n_full}",
        line.join(" ")
    ))
}

// 8

fn rank_oracle(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn statistics_properties() -> Outcome {
    let series = (3usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..8).prop_map(f64::from), n),
            prop::collection::vec((-50i32..50).prop_map(|v| f64::from(v) / 4.0), n),
        )
    });
    let fixtures = AtomicUsize::new(0);
    let worst = std::sync::Mutex::new(0.0f64);
    runner(100)
        .run(&series, |(x, y)| {
            fixtures.fetch_add(1, Ordering::Relaxed);
            match spearman(&x, &y) {
                Ok((rho, _)) => {
                    let oracle = pearson(&rank_oracle(&x), &rank_oracle(&y));
                    let diff = (rho - oracle).abs();
                    let mut w = worst.lock().unwrap();
                    *w = w.max(diff);
                    prop_assert!(diff <= 1e-12, "{} vs {}", rho, oracle);
                }
                Err(_) => prop_assert!(x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0])),
            }
            Ok(())
        })
        .map_err(|e| format!("spearman: {e}"))?;
    runner(100)
        .run(&prop::collection::vec(-1e6f64..1e6, 1..200), |values| {
            let points = cdf(&values);
            prop_assert_eq!(points.last().map(|p| p.1), Some(1.0));
            for w in points.windows(2) {
                prop_assert!(w[0].0 < w[1].0 && w[0].1 <= w[1].1);
            }
            Ok(())
        })
        .map_err(|e| format!("cdf: {e}"))?;
    runner(100)
        .run(&(1u64..200, 200u64..400, 1u64..200, 200u64..400), |(sb, nb, sa, na)| {
            let ab = contamination_test((sb, nb), (sa, na)).unwrap();
            let ba = contamination_test((sa, na), (sb, nb)).unwrap();
            prop_assert!((ab + ba - 1.0).abs() <= 1e-12, "{} + {}", ab, ba);
            Ok(())
        })
        .map_err(|e| format!("contamination symmetry: {e}"))?;
    let n = fixtures.load(Ordering::Relaxed);
    check(n >= 100, format!("only {n} spearman fixtures"))?;
    Ok(format!(
        "{n} spearman fixtures (max |Δρ| {:.1e}), CDF monotone to 1.0, p(a,b)+p(b,a)=1",
        *worst.lock().unwrap()
    ))
}

// 9

struct CountingRuntime {
    inner: LocalRuntime,
    created: AtomicUsize,
}

impl Runtime for CountingRuntime {
    fn create(&self, spec: &SandboxSpec, source: &str, commit: &str) -> Result<Box<dyn Sandbox>, SandboxError> {
        self.created.fetch_add(1, Ordering::Relaxed);
        self.inner.create(spec, source, commit)
    }

    fn restore(&self, image: &str, spec: &SandboxSpec) -> Result<Box<dyn Sandbox>, SandboxError> {
        self.inner.restore(image, spec)
    }

    fn image_exists(&self, image: &str) -> bool {
        self.inner.image_exists(image)
    }
}

fn iteration_bound() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tree = fixtures().join("repos/brokenbuild");
    let files: Vec<(String, String)> = walkdir::WalkDir::new(&tree)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(&tree).unwrap().to_string_lossy().into_owned();
            (rel, std::fs::read_to_string(e.path()).unwrap())
        })
        .collect();
    let refs: Vec<(&str, &str)> = files.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let (origin, head) = common::repo_with(work.path(), &refs);
    let mirror = Mirror::clone_from(&origin.to_string_lossy()).map_err(|e| e.to_string())?;
    let cassette = Cassette::open(
        CassetteMode::Replay,
        Some(&fixtures().join("llm/always_fail.cassette.json")),
        None,
    )
    .map_err(|e| e.to_string())?;
    let gateway = Gateway::new(Arc::new(cassette), Config::default().llm.model, 0);
    let runtime = CountingRuntime {
        inner: LocalRuntime::new(Some(&work.path().join("sandboxes"))).map_err(|e| e.to_string())?,
        created: AtomicUsize::new(0),
    };
    let fetcher = MapFetcher::new([]);
    let refs_db = ReferenceDb::in_memory();
    let mut cfg = Config::default();
    cfg.sandbox.runtime = RuntimeKind::Local;
    let agent = Agent {
        gateway: &gateway,
        fetcher: &fetcher,
        runtime: &runtime,
        references: &refs_db,
        settings: AgentSettings::from_config(&cfg),
    };
    let cutoff = Date::new(2022, 1, 1).unwrap();
    let outcome = agent
        .setup(&mirror, "toy/brokenbuild", &head, cutoff)
        .map_err(|e| e.to_string())?;
    let runs = runtime.created.load(Ordering::Relaxed);
    let actions: Vec<RepairAction> = outcome.trail.iter().map(|t| t.action).collect();
    check(!outcome.accepted, "accepted")?;
    check(
        outcome.rejection_reason == Some(RejectionReason::IterationLimit),
        format!("{:?}", outcome.rejection_reason),
    )?;
    check(outcome.trail.len() == 4, format!("{} repairs", outcome.trail.len()))?;
    check(
        actions.iter().all(|a| *a == RepairAction::InstallUpdated),
        format!("{actions:?}"),
    )?;
    check(runs == 5, format!("{runs} sandbox runs"))?;
    Ok(format!(
        "4 repairs over {runs} runs, then {}",
        RejectionReason::IterationLimit
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("contamination statistic reproduction", contamination_reproduction),
        ("resolution semantics oracle equivalence", resolution_semantics),
        ("validation threshold", validation_threshold),
        ("parser round trip", parser_round_trip),
        ("pinning invariant", pinning_invariant),
        ("hermetic end to end", hermetic_end_to_end),
        ("funnel monotonicity", funnel_monotonicity),
        ("statistics properties", statistics_properties),
        ("iteration bound", iteration_bound),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let line = match result {
            Ok(detail) => format!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed.push(i + 1);
                format!("criterion {} FAIL {name}: {why}", i + 1)
            }
        };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}").and_then(|_| out.flush());
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
