//! Dataset characteristics and statistical analyses.

pub mod distribution;
pub mod lcs;
pub mod metrics;
pub mod stats;
pub mod table;

pub use distribution::{cdf, pdf, Bin};
pub use metrics::{fix_complexity, issue_metrics, FixComplexity, IssueMetrics};
pub use stats::{contamination_test, spearman, StatsError};
