//! Iterative improvement phase: run the commands in a clean sandbox,
//! classify the first failure, and apply a model-proposed repair.

use std::io::Write;
use std::path::PathBuf;

use benchgen_core::answer::{parse_bash_block, parse_labeled, parse_python_version, parse_reasoning, AnswerError};
use benchgen_core::excerpt::excerpt_error;
use benchgen_core::pinning::is_virtualenv_command;
use benchgen_core::prompt::{command_lines, PromptId};
use benchgen_core::report::detect_and_parse;
use benchgen_core::threshold::RejectionReason;
use benchgen_core::CommandSet;
use serde::{Deserialize, Serialize};

use crate::llm::gateway::{Gateway, GatewayError};
use crate::sandbox::{ExecOptions, ExecResult, Runtime, Sandbox, SandboxError, SandboxSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Cause {
    Python,
    Installation,
    Testing,
    Undecidable,
}

impl Cause {
    const NAMES: [&'static str; 4] = ["PYTHON", "INSTALLATION", "TESTING", "UNDECIDABLE"];

    fn from_name(name: &str) -> Cause {
        match name {
            "PYTHON" => Cause::Python,
            "INSTALLATION" => Cause::Installation,
            "TESTING" => Cause::Testing,
            _ => Cause::Undecidable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairAction {
    PythonChanged,
    InstallUpdated,
    TestUpdated,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Install,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairIteration {
    pub index: usize,
    pub phase: Phase,
    pub failing_command: String,
    pub error_excerpt: String,
    pub cause: Cause,
    pub cause_reasoning: String,
    pub action: RepairAction,
    pub resulting: CommandSet,
}

pub enum RunOutcome {
    /// Output of the test commands, in order.
    Success {
        output: String,
        test_seconds: f64,
    },
    Failure {
        phase: Phase,
        result: ExecResult,
    },
}

/// Result of the improvement phase. A successful attempt keeps its sandbox
/// alive for validation.
pub struct SetupAttempt {
    pub cmds: CommandSet,
    pub trail: Vec<RepairIteration>,
    pub outcome: AttemptOutcome,
}

pub enum AttemptOutcome {
    Success {
        output: String,
        test_seconds: f64,
        sandbox: Box<dyn Sandbox>,
    },
    Rejected {
        reason: RejectionReason,
        detail: String,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ImproveError {
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A test command that exits non-zero still counts as a run when its output
/// holds test results with at least one pass.
fn ran_tests(result: &ExecResult) -> bool {
    !result.timed_out && detect_and_parse(&result.output).is_ok_and(|r| r.summary_counts.passed > 0)
}

pub struct Improver<'a> {
    pub gateway: &'a Gateway,
    pub runtime: &'a dyn Runtime,
    /// Template spec; the interpreter version comes from the command set.
    pub spec: SandboxSpec,
    pub network_during_tests: bool,
    pub max_iterations: usize,
    /// JSON-lines file receiving one record per repair iteration.
    pub trail_path: Option<PathBuf>,
}

impl Improver<'_> {
    pub fn spec_for(&self, cmds: &CommandSet) -> SandboxSpec {
        SandboxSpec {
            python_version: cmds.python_version.clone(),
            ..self.spec.clone()
        }
    }

    /// Runs install commands up to the first failure, then the test
    /// commands.
    pub fn run_setup(&self, sandbox: &mut dyn Sandbox, cmds: &CommandSet) -> Result<RunOutcome, SandboxError> {
        let install = ExecOptions {
            timeout: self.spec.install_timeout,
            network: true,
        };
        for cmd in &cmds.install {
            let res = sandbox.exec(cmd, install)?;
            if !res.success() {
                return Ok(RunOutcome::Failure {
                    phase: Phase::Install,
                    result: res,
                });
            }
        }
        let test = ExecOptions {
            timeout: self.spec.test_timeout,
            network: self.network_during_tests,
        };
        let mut output = String::new();
        let mut seconds = 0.0;
        for cmd in &cmds.test {
            let res = sandbox.exec(cmd, test)?;
            if !res.success() && !ran_tests(&res) {
                return Ok(RunOutcome::Failure {
                    phase: Phase::Test,
                    result: res,
                });
            }
            seconds += res.duration_secs;
            output.push_str(&res.output);
            if !output.ends_with('\n') {
                output.push('\n');
            }
        }
        Ok(RunOutcome::Success {
            output,
            test_seconds: seconds,
        })
    }

    /// Cause of a failure with the model's reasoning; unparsable answers
    /// count as undecidable.
    pub fn classify_cause(
        &self,
        repo_id: &str,
        cmds: &CommandSet,
        failing_command: &str,
        excerpt: &str,
    ) -> Result<(Cause, String), GatewayError> {
        let install = command_lines(&cmds.install);
        let test = command_lines(&cmds.test);
        let vars = [
            ("repo_id", repo_id),
            ("python_version", cmds.python_version.as_str()),
            ("install_commands", install.as_str()),
            ("test_commands", test.as_str()),
            ("error_command", failing_command),
            ("error_message", excerpt),
        ];
        let parsed = self.gateway.ask_parsed(PromptId::ErrorCause, &vars, |t| {
            let cause = parse_labeled(t, "RESULT", &Cause::NAMES)?;
            Ok::<_, AnswerError>((Cause::from_name(cause), parse_reasoning(t)))
        });
        match parsed {
            Ok(v) => Ok(v),
            Err(GatewayError::Unparsable { .. }) => Ok((Cause::Undecidable, String::new())),
            Err(e) => Err(e),
        }
    }

    /// The repaired command set, or `None` when the model gives up.
    #[allow(clippy::too_many_arguments)]
    pub fn apply_fix(
        &self,
        repo_id: &str,
        cause: Cause,
        phase: Phase,
        cmds: &CommandSet,
        failing_command: &str,
        excerpt: &str,
        reasoning: &str,
    ) -> Result<Option<(CommandSet, RepairAction)>, GatewayError> {
        let py = cmds.python_version.as_str();
        let commands = |list: &[String]| command_lines(list);
        let unparsable_is_abort = |r: Result<Vec<String>, GatewayError>| match r {
            Ok(v) => Ok(Some(
                v.into_iter().filter(|c| !is_virtualenv_command(c)).collect::<Vec<_>>(),
            )),
            Err(GatewayError::Unparsable { .. }) => Ok(None),
            Err(e) => Err(e),
        };
        let mut next = cmds.clone();
        let action = match cause {
            Cause::Undecidable => return Ok(None),
            Cause::Python => {
                let vars = [
                    ("repo_id", repo_id),
                    ("python_version", py),
                    ("error_message", excerpt),
                    ("reasoning", reasoning),
                ];
                match self
                    .gateway
                    .ask_parsed(PromptId::PythonFix, &vars, parse_python_version)
                {
                    Ok(Some(v)) => next.python_version = v,
                    Ok(None) | Err(GatewayError::Unparsable { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                }
                RepairAction::PythonChanged
            }
            Cause::Installation => {
                let install = commands(&cmds.install);
                let reply = if phase == Phase::Install {
                    let vars = [
                        ("repo_id", repo_id),
                        ("python_version", py),
                        ("commands", install.as_str()),
                        ("error_command", failing_command),
                        ("error_message", excerpt),
                    ];
                    self.gateway
                        .ask_parsed(PromptId::InstallFixBuild, &vars, parse_bash_block)
                } else {
                    let vars = [
                        ("repo_id", repo_id),
                        ("python_version", py),
                        ("commands", install.as_str()),
                        ("error_message", excerpt),
                        ("reasoning", reasoning),
                    ];
                    self.gateway
                        .ask_parsed(PromptId::InstallFixRun, &vars, parse_bash_block)
                };
                match unparsable_is_abort(reply)? {
                    Some(v) if !v.is_empty() => next.install = v,
                    _ => return Ok(None),
                }
                RepairAction::InstallUpdated
            }
            Cause::Testing => {
                let test = commands(&cmds.test);
                let vars = [
                    ("repo_id", repo_id),
                    ("python_version", py),
                    ("commands", test.as_str()),
                    ("error_message", excerpt),
                    ("reasoning", reasoning),
                ];
                match unparsable_is_abort(self.gateway.ask_parsed(PromptId::TestFix, &vars, parse_bash_block))? {
                    Some(v) if !v.is_empty() => next.test = v,
                    _ => return Ok(None),
                }
                RepairAction::TestUpdated
            }
        };
        next.pin_all();
        Ok(Some((next, action)))
    }

    fn record(&self, it: &RepairIteration) {
        let Some(path) = &self.trail_path else { return };
        let line = match serde_json::to_string(it) {
            Ok(l) => l,
            Err(e) => {
                tracing::warn!(error = %e, "cannot serialize repair iteration");
                return;
            }
        };
        let res = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = res {
            tracing::warn!(path = %path.display(), error = %e, "cannot append repair trail");
        }
    }

    /// Runs, classifies, and repairs until the commands succeed, the model
    /// gives up, or `max_iterations` repairs have been spent. Every run
    /// starts from a fresh sandbox.
    pub fn improve(
        &self,
        source: &str,
        commit: &str,
        repo_id: &str,
        initial: CommandSet,
    ) -> Result<SetupAttempt, ImproveError> {
        let mut cmds = initial;
        let mut trail: Vec<RepairIteration> = Vec::new();
        let reject = |cmds: CommandSet, trail, reason, detail: String| SetupAttempt {
            cmds,
            trail,
            outcome: AttemptOutcome::Rejected { reason, detail },
        };
        loop {
            let mut sandbox = match self.runtime.create(&self.spec_for(&cmds), source, commit) {
                Ok(s) => s,
                Err(e @ SandboxError::InterpreterUnavailable(_)) => {
                    return Ok(reject(cmds, trail, RejectionReason::EnvironmentError, e.to_string()));
                }
                Err(e) => return Err(e.into()),
            };
            let (phase, result) = match self.run_setup(sandbox.as_mut(), &cmds)? {
                RunOutcome::Success { output, test_seconds } => {
                    return Ok(SetupAttempt {
                        cmds,
                        trail,
                        outcome: AttemptOutcome::Success {
                            output,
                            test_seconds,
                            sandbox,
                        },
                    });
                }
                RunOutcome::Failure { phase, result } => (phase, result),
            };
            drop(sandbox);
            tracing::info!(repo = repo_id, command = %result.command, exit = result.exit_code, "setup command failed");
            if trail.len() >= self.max_iterations {
                let detail = format!(
                    "`{}` exited {} after {} repairs",
                    result.command,
                    result.exit_code,
                    trail.len()
                );
                return Ok(reject(cmds, trail, RejectionReason::IterationLimit, detail));
            }
            let excerpt = excerpt_error(&result.output);
            let (cause, reasoning) = self.classify_cause(repo_id, &cmds, &result.command, &excerpt)?;
            let fix = self.apply_fix(repo_id, cause, phase, &cmds, &result.command, &excerpt, &reasoning)?;
            let (resulting, action) = match fix {
                Some((next, action)) => (next, action),
                None => (cmds.clone(), RepairAction::Aborted),
            };
            let it = RepairIteration {
                index: trail.len(),
                phase,
                failing_command: result.command.clone(),
                error_excerpt: excerpt,
                cause,
                cause_reasoning: reasoning,
                action,
                resulting: resulting.clone(),
            };
            self.record(&it);
            trail.push(it);
            if action == RepairAction::Aborted {
                let detail = format!("no repair for `{}` (cause {:?})", result.command, cause);
                return Ok(reject(cmds, trail, RejectionReason::Aborted, detail));
            }
            cmds = resulting;
        }
    }
}
