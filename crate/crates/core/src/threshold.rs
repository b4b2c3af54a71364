//! Acceptance rule for a candidate environment.

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::report::SummaryCounts;

pub const DEFAULT_MIN_PASS_RATE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    LlmJudgedFailure,
    BelowThreshold,
    NoTests,
    ParseFailure,
    /// The repair budget ran out before the commands succeeded.
    IterationLimit,
    /// The model declared the failure unfixable.
    Aborted,
    NoCommands,
    EnvironmentError,
}

impl RejectionReason {
    pub fn name(self) -> &'static str {
        match self {
            RejectionReason::LlmJudgedFailure => "llm_judged_failure",
            RejectionReason::BelowThreshold => "below_threshold",
            RejectionReason::NoTests => "no_tests",
            RejectionReason::ParseFailure => "parse_failure",
            RejectionReason::IterationLimit => "iteration_limit",
            RejectionReason::Aborted => "aborted",
            RejectionReason::NoCommands => "no_commands",
            RejectionReason::EnvironmentError => "environment_error",
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts iff the judge said yes, the report parsed, at least one test has
/// a verdict, and the pass rate reaches `min_pass_rate` (inclusive).
pub fn accept(
    judged_success: bool,
    counts: Option<&SummaryCounts>,
    min_pass_rate: f64,
) -> Result<f64, RejectionReason> {
    if !judged_success {
        return Err(RejectionReason::LlmJudgedFailure);
    }
    let counts = counts.ok_or(RejectionReason::ParseFailure)?;
    let judged = counts.judged();
    if judged == 0 {
        return Err(RejectionReason::NoTests);
    }
    let rate = counts.passed as f64 / judged as f64;
    if rate + 1e-12 < min_pass_rate {
        return Err(RejectionReason::BelowThreshold);
    }
    Ok(rate)
}
