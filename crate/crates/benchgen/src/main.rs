use std::path::{Path, PathBuf};
use std::process::ExitCode;

use benchgen::agent::{Agent, AgentError, AgentSettings};
use benchgen::analyze::{analyze, write_analysis};
use benchgen::builder::{BuildSettings, Builder};
use benchgen::config::{Ablation, CassetteMode, Config, RuntimeKind};
use benchgen::forge::canonical_repo;
use benchgen::harness::{EvalReport, Evaluator};
use benchgen::repo::Mirror;
use benchgen::sandbox::SandboxError;
use benchgen::session;
use benchgen::validation::ReferenceDb;
use benchgen_core::dataset::{Prediction, TaskInstance};
use benchgen_core::Date;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "benchgen",
    version,
    about = "Repository setup agent and repair benchmark builder"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true, env = "BENCHGEN_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    cassette: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    cassette_mode: Option<CassetteMode>,
    /// JSON rule file answering prompts without a live model.
    #[arg(long, global = true)]
    scripted: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    runtime: Option<RuntimeKind>,
    /// Scratch directory of the local runtime; images persist there.
    #[arg(long, global = true)]
    local_root: Option<PathBuf>,
    /// Offline forge directory instead of the GitHub API.
    #[arg(long, global = true)]
    forge_fixture: Option<PathBuf>,
    #[arg(long, global = true)]
    min_pass_rate: Option<f64>,
    #[arg(long, global = true)]
    reference_store: Option<PathBuf>,
    #[arg(long, global = true)]
    no_browsing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Set up one repository snapshot.
    Setup {
        /// Clone URL or local repository path.
        #[arg(long)]
        repo: String,
        /// `org/name` used in prompts and image tags.
        #[arg(long)]
        repo_id: Option<String>,
        #[arg(long, conflicts_with = "date")]
        commit: Option<String>,
        /// Use the last commit before this date; it is also the cutoff.
        #[arg(long)]
        date: Option<String>,
        /// Dependency cutoff; defaults to the commit date.
        #[arg(long)]
        cutoff: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a dataset from a repository list.
    Build {
        #[arg(long)]
        repos: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        ablate: Option<Ablation>,
        #[arg(long)]
        n_per_repo: Option<usize>,
        #[arg(long)]
        scan_cap: Option<usize>,
    },
    /// Evaluate predictions against a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dataset characteristics, correlations, and contamination statistics.
    Analyze {
        /// `[name=]path` of a dataset JSONL file; repeatable.
        #[arg(long, required = true)]
        dataset: Vec<String>,
        /// `[name=]path` of an evaluation report; repeatable.
        #[arg(long)]
        report: Vec<String>,
        #[arg(long)]
        knowledge_cutoff: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Exit(u8, String);

type CmdResult = Result<u8, Exit>;

fn usage(msg: impl std::fmt::Display) -> Exit {
    Exit(2, msg.to_string())
}

fn load_config(g: &Global) -> Result<Config, Exit> {
    let mut cfg = match &g.config {
        Some(p) => Config::load(p).map_err(usage)?,
        None => Config::default(),
    };
    if let Some(w) = g.workers {
        cfg.build.workers = w;
    }
    if let Some(c) = &g.cassette {
        cfg.llm.cassette = Some(c.clone());
    }
    if let Some(m) = g.cassette_mode {
        cfg.llm.cassette_mode = m;
    }
    if let Some(s) = &g.scripted {
        cfg.llm.scripted = Some(s.clone());
    }
    if let Some(r) = g.runtime {
        cfg.sandbox.runtime = r;
    }
    if let Some(r) = &g.local_root {
        cfg.sandbox.local_root = Some(r.clone());
    }
    if let Some(m) = g.min_pass_rate {
        cfg.build.min_pass_rate = m;
    }
    if let Some(r) = &g.reference_store {
        cfg.build.reference_store = Some(r.clone());
    }
    if g.no_browsing {
        cfg.browsing.enabled = false;
    }
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Exit> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Exit(2, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Exit(2, format!("{}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Exit> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).map_err(|e| Exit(2, e.to_string()))?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Exit(2, format!("{}: {e}", path.display())))
}

/// JSON lines, or a single JSON array.
fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Exit> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| usage(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

fn named(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let name = path
                .file_stem()
                .map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
            (name, path)
        }
    }
}

fn parse_date(s: &str) -> Result<Date, Exit> {
    Date::parse_prefix(s).map_err(|e| usage(format!("bad date {s}: {e}")))
}

fn references(cfg: &Config, fallback: Option<PathBuf>) -> Result<ReferenceDb, Exit> {
    match cfg.build.reference_store.clone().or(fallback) {
        Some(p) => ReferenceDb::open(&p).map_err(usage),
        None => Ok(ReferenceDb::in_memory()),
    }
}

fn infra(e: AgentError) -> Exit {
    Exit(2, e.to_string())
}

fn cmd_setup(
    cfg: &Config,
    repo: &str,
    repo_id: Option<String>,
    commit: Option<String>,
    date: Option<String>,
    cutoff: Option<String>,
    out: &Path,
) -> CmdResult {
    let repo_id = repo_id
        .or_else(|| canonical_repo(repo).filter(|_| repo.contains("://") || repo.starts_with("git@")))
        .unwrap_or_else(|| {
            let name = Path::new(repo)
                .file_name()
                .map_or("repo".into(), |n| n.to_string_lossy().into_owned());
            format!("local/{name}")
        });
    let mirror = Mirror::clone_from(repo).map_err(|e| usage(SandboxError::CloneError(e.to_string())))?;
    let date = date.as_deref().map(parse_date).transpose()?;
    let commit = match (commit, date) {
        (Some(c), _) => c,
        (None, Some(d)) => mirror.commit_before(d).map_err(usage)?,
        (None, None) => "HEAD".to_string(),
    };
    let resolved = mirror
        .resolve(&commit)
        .map_err(|e| usage(SandboxError::CloneError(e.to_string())))?;
    let cutoff = match (cutoff, date) {
        (Some(c), _) => parse_date(&c)?,
        (None, Some(d)) => d,
        (None, None) => mirror.commit_date(&resolved).map_err(usage)?,
    };
    std::fs::create_dir_all(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    let gateway = session::gateway(cfg).map_err(usage)?;
    let runtime = session::runtime(cfg).map_err(usage)?;
    let fetcher = session::fetcher();
    let refs = references(cfg, None)?;
    let mut settings = AgentSettings::from_config(cfg);
    settings.trail_dir = Some(out.to_path_buf());
    let agent = Agent {
        gateway: &gateway,
        fetcher: fetcher.as_ref(),
        runtime: runtime.as_ref(),
        references: &refs,
        settings,
    };
    let outcome = agent.setup(&mirror, &repo_id, &resolved, cutoff).map_err(infra)?;
    write_json(&out.join("outcome.json"), &outcome)?;
    write_json(&out.join("commands.json"), &outcome.cmds)?;
    if outcome.accepted {
        println!(
            "accepted {repo_id}@{} image {}",
            &resolved[..12.min(resolved.len())],
            outcome.image.as_deref().unwrap_or("-")
        );
        Ok(0)
    } else {
        let reason = outcome
            .rejection_reason
            .map(|r| r.name().to_string())
            .unwrap_or_else(|| "rejected".into());
        println!("rejected {repo_id}: {reason} ({})", outcome.detail);
        Ok(1)
    }
}

fn cmd_build(
    cfg: &mut Config,
    repos: &Path,
    out: &Path,
    ablate: Option<Ablation>,
    forge_fixture: Option<&PathBuf>,
) -> CmdResult {
    let text = std::fs::read_to_string(repos).map_err(|e| usage(format!("{}: {e}", repos.display())))?;
    let entries: Vec<String> = text.lines().map(str::to_string).collect();
    if entries.iter().all(|e| e.trim().is_empty() || e.trim().starts_with('#')) {
        return Err(usage(format!("{} lists no repositories", repos.display())));
    }
    if let Some(a) = ablate {
        cfg.ablate(a);
    }
    std::fs::create_dir_all(out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    let forge = session::forge(forge_fixture).map_err(usage)?;
    let gateway = session::gateway(cfg).map_err(usage)?;
    let runtime = session::runtime(cfg).map_err(usage)?;
    let fetcher = session::fetcher();
    let refs = references(cfg, Some(out.join("references.json")))?;
    let mut settings = AgentSettings::from_config(cfg);
    settings.trail_dir = Some(out.join("trails"));
    let builder = Builder {
        forge: forge.as_ref(),
        agent: Agent {
            gateway: &gateway,
            fetcher: fetcher.as_ref(),
            runtime: runtime.as_ref(),
            references: &refs,
            settings,
        },
        settings: BuildSettings {
            n_per_repo: cfg.build.n_per_repo,
            scan_cap: cfg.build.scan_cap,
            workers: cfg.build.workers,
        },
    };
    let report = builder.build(&entries);
    write_jsonl(&out.join("dataset.jsonl"), &report.instances)?;
    write_json(&out.join("funnel.json"), &report.funnel)?;
    write_json(&out.join("failures.json"), &report.failures)?;
    for stage in &report.funnel.stages {
        println!("{:<22} {}", stage.name, stage.count);
    }
    let (calls, prompt, completion) = gateway.usage();
    tracing::info!(
        calls,
        prompt_tokens = prompt,
        completion_tokens = completion,
        "model usage"
    );
    Ok(if report.instances.is_empty() { 1 } else { 0 })
}

fn cmd_evaluate(cfg: &Config, dataset: &Path, predictions: &Path, out: &Path) -> CmdResult {
    let instances: Vec<TaskInstance> = read_records(dataset)?;
    let preds: Vec<Prediction> = read_records(predictions)?;
    let runtime = session::runtime(cfg).map_err(usage)?;
    let settings = AgentSettings::from_config(cfg);
    let evaluator = Evaluator {
        runtime: runtime.as_ref(),
        spec: settings.spec,
        network: settings.network_during_tests,
    };
    let report = evaluator.evaluate_all(&instances, preds, cfg.build.workers);
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    }
    write_json(out, &report)?;
    let o = &report.accuracy.overall;
    println!("resolved {}/{} ({:.2}%)", o.resolved, o.total, o.accuracy);
    Ok(0)
}

fn cmd_analyze(datasets: &[String], reports: &[String], cutoff: Option<String>, out: &Path) -> CmdResult {
    let mut ds = Vec::new();
    for arg in datasets {
        let (name, path) = named(arg);
        ds.push((name, read_records::<TaskInstance>(&path)?));
    }
    let mut rs = Vec::new();
    for arg in reports {
        let (name, path) = named(arg);
        let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let report: EvalReport = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        rs.push((name, report));
    }
    let cutoff = cutoff.as_deref().map(parse_date).transpose()?;
    let analysis = analyze(&ds, &rs, cutoff).map_err(usage)?;
    write_analysis(out, &analysis).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    for row in &analysis.contamination {
        let p = row.p_value.map_or("n/a".to_string(), |p| format!("{p:.4}"));
        println!(
            "{}: before {}/{} after {}/{} p={p}",
            row.report, row.before.0, row.before.1, row.after.0, row.after.1
        );
    }
    Ok(0)
}

fn run(cli: Cli) -> CmdResult {
    let mut cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Setup {
            repo,
            repo_id,
            commit,
            date,
            cutoff,
            out,
        } => cmd_setup(&cfg, &repo, repo_id, commit, date, cutoff, &out),
        Command::Build {
            repos,
            out,
            ablate,
            n_per_repo,
            scan_cap,
        } => {
            if let Some(n) = n_per_repo {
                cfg.build.n_per_repo = n;
            }
            if let Some(s) = scan_cap {
                cfg.build.scan_cap = s;
            }
            cmd_build(&mut cfg, &repos, &out, ablate, cli.global.forge_fixture.as_ref())
        }
        Command::Evaluate {
            dataset,
            predictions,
            out,
        } => cmd_evaluate(&cfg, &dataset, &predictions, &out),
        Command::Analyze {
            dataset,
            report,
            knowledge_cutoff,
            out,
        } => cmd_analyze(&dataset, &report, knowledge_cutoff, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.global.log_level)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, msg)) => {
            tracing::error!(code, "{msg}");
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
