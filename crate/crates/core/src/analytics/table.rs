//! Mean dataset characteristics and per-characteristic correlations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::IssueMetrics;
use super::stats::spearman;
use crate::behavior::BehaviorCounts;

/// Everything measured for one task instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceCharacteristics {
    pub codebase_files: f64,
    pub codebase_lines: f64,
    pub issue: IssueMetrics,
    pub counts: BehaviorCounts,
    pub test_edited_files: f64,
    pub test_edited_lines: f64,
    pub added_tests: f64,
    pub removed_tests: f64,
    pub fix_edited_files: f64,
    pub fix_edited_lines: f64,
    pub repo_age_days: Option<f64>,
    pub stars: Option<f64>,
}

type Getter = fn(&InstanceCharacteristics) -> f64;
type OptGetter = fn(&InstanceCharacteristics) -> Option<f64>;

/// `(group, row label, value)` for the mean-characteristics table.
pub const TABLE_ROWS: &[(&str, &str, Getter)] = &[
    ("Codebase", "# Files", |c| c.codebase_files),
    ("Codebase", "# Lines", |c| c.codebase_lines),
    ("Issue Descriptions", "# Words", |c| c.issue.words as f64),
    ("Issue Descriptions", "# Error Messages", |c| {
        c.issue.error_messages as f64
    }),
    ("Issue Descriptions", "# Code Blocks", |c| c.issue.code_blocks as f64),
    ("Tests", "# P→P", |c| c.counts.pass_to_pass as f64),
    ("Tests", "# F→P", |c| c.counts.fail_to_pass as f64),
    ("Tests", "# F→F", |c| c.counts.fail_to_fail as f64),
    ("Tests", "# P→F", |c| c.counts.pass_to_fail as f64),
    ("Test Patches", "# Edited Files", |c| c.test_edited_files),
    ("Test Patches", "# Edited Lines", |c| c.test_edited_lines),
    ("Test Patches", "# Added Tests", |c| c.added_tests),
    ("Test Patches", "# Removed Tests", |c| c.removed_tests),
    ("Fix Patches", "# Edited Files", |c| c.fix_edited_files),
    ("Fix Patches", "# Edited Lines", |c| c.fix_edited_lines),
];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        String::from(s)
    }
}

/// CSV with one row per characteristic and one mean column per dataset.
pub fn means_csv(datasets: &[(&str, &[InstanceCharacteristics])]) -> String {
    let mut out = String::from("group,characteristic");
    for (name, _) in datasets {
        out.push(',');
        out.push_str(&csv_field(name));
    }
    out.push('\n');
    for (group, label, get) in TABLE_ROWS {
        out.push_str(&format!("{},{}", csv_field(group), csv_field(label)));
        for (_, rows) in datasets {
            let mean = if rows.is_empty() {
                0.0
            } else {
                rows.iter().map(get).sum::<f64>() / rows.len() as f64
            };
            out.push_str(&format!(",{mean}"));
        }
        out.push('\n');
    }
    out
}

/// Characteristics correlated against per-instance resolution.
pub const CORRELATION_ROWS: &[(&str, OptGetter)] = &[
    ("Repo Age", |c| c.repo_age_days),
    ("# GitHub Stars", |c| c.stars),
    ("# Words in Issue", |c| Some(c.issue.words as f64)),
    ("# Code Blocks in Issue", |c| Some(c.issue.code_blocks as f64)),
    ("# Error Messages in Issue", |c| Some(c.issue.error_messages as f64)),
    ("# Fix File Names in Issue", |c| {
        Some(c.issue.fix_file_names_in_issue as f64)
    }),
    ("Longest Fix Substring in Issue", |c| {
        Some(c.issue.longest_fix_substring as f64)
    }),
    ("# Fix Lines in Issue", |c| Some(c.issue.fix_lines_in_issue as f64)),
    ("# Lines in Fix", |c| Some(c.fix_edited_lines)),
    ("# Files in Fix", |c| Some(c.fix_edited_files)),
    ("# Affected Tests", |c| {
        Some((c.counts.fail_to_pass + c.counts.pass_to_fail) as f64)
    }),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub characteristic: String,
    pub n: usize,
    /// `None` when the data were degenerate or too few.
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
}

/// Spearman correlation of each characteristic with a per-instance outcome
/// (e.g. the fraction of agents resolving it).
pub fn correlations(rows: &[(InstanceCharacteristics, f64)]) -> Vec<Correlation> {
    CORRELATION_ROWS
        .iter()
        .map(|(name, get)| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|(c, r)| get(c).map(|v| (v, *r))).unzip();
            let res = spearman(&x, &y).ok();
            Correlation {
                characteristic: String::from(*name),
                n: x.len(),
                rho: res.map(|r| r.0),
                p_value: res.map(|r| r.1),
            }
        })
        .collect()
}
