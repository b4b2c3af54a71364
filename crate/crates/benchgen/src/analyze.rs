//! Dataset characterization, resolution correlations, and the knowledge
//! cutoff contamination test.

use std::collections::BTreeMap;
use std::path::Path;

use benchgen_core::analytics::distribution::{cdf_csv, pdf_csv};
use benchgen_core::analytics::table::{correlations, means_csv, Correlation, InstanceCharacteristics};
use benchgen_core::analytics::{cdf, contamination_test, fix_complexity, issue_metrics, pdf};
use benchgen_core::dataset::TaskInstance;
use benchgen_core::diff::{stats, test_functions_changed, DiffError};
use benchgen_core::Date;
use serde::{Deserialize, Serialize};

use crate::harness::EvalReport;

type Metric = (&'static str, fn(&InstanceCharacteristics) -> f64);

/// Metrics exported as distributions.
pub const DISTRIBUTIONS: &[Metric] = &[
    ("issue_words", |c| c.issue.words as f64),
    ("issue_code_blocks", |c| c.issue.code_blocks as f64),
    ("issue_error_messages", |c| c.issue.error_messages as f64),
    ("fix_file_names_in_issue", |c| c.issue.fix_file_names_in_issue as f64),
    ("longest_fix_substring", |c| c.issue.longest_fix_substring as f64),
    ("fix_lines_in_issue", |c| c.issue.fix_lines_in_issue as f64),
    ("fix_edited_lines", |c| c.fix_edited_lines),
    ("fix_edited_files", |c| c.fix_edited_files),
    ("affected_tests", |c| {
        (c.counts.fail_to_pass + c.counts.pass_to_fail) as f64
    }),
];

pub fn characteristics(instance: &TaskInstance) -> Result<InstanceCharacteristics, DiffError> {
    let test = stats(&instance.test_patch)?;
    let (added, removed) = test_functions_changed(&instance.test_patch)?;
    let fix = fix_complexity(&instance.patch, &instance.reference_map())?;
    let age = instance.repo_info.created_at.as_deref().and_then(|c| {
        let start = Date::parse_prefix(c).ok()?;
        let end = Date::parse_prefix(&instance.created_at).ok()?;
        Some(start.days_until(&end) as f64)
    });
    Ok(InstanceCharacteristics {
        codebase_files: instance.codebase.files as f64,
        codebase_lines: instance.codebase.lines as f64,
        issue: issue_metrics(&instance.problem_statement, &instance.patch),
        counts: instance.reference_counts,
        test_edited_files: test.files as f64,
        test_edited_lines: test.edited_lines() as f64,
        added_tests: added.len() as f64,
        removed_tests: removed.len() as f64,
        fix_edited_files: fix.edited_files as f64,
        fix_edited_lines: fix.edited_lines as f64,
        repo_age_days: age,
        stars: instance.repo_info.stars.map(|s| s as f64),
    })
}

/// Success and trial counts on either side of a knowledge cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationRow {
    pub report: String,
    pub before: (u64, u64),
    pub after: (u64, u64),
    /// `None` when a side is empty or the pooled rate is 0 or 1.
    pub p_value: Option<f64>,
}

pub fn contamination(name: &str, instances: &[TaskInstance], report: &EvalReport, cutoff: Date) -> ContaminationRow {
    let resolved: BTreeMap<&str, bool> = report
        .results
        .iter()
        .map(|r| (r.instance_id.as_str(), r.resolved))
        .collect();
    let mut before = (0, 0);
    let mut after = (0, 0);
    for inst in instances {
        let Ok(created) = Date::parse_prefix(&inst.created_at) else {
            continue;
        };
        let side = if created < cutoff { &mut before } else { &mut after };
        side.1 += 1;
        if resolved.get(inst.instance_id.as_str()).copied().unwrap_or(false) {
            side.0 += 1;
        }
    }
    ContaminationRow {
        report: name.to_string(),
        before,
        after,
        p_value: contamination_test(before, after).ok(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub means_csv: String,
    pub cdf_csv: String,
    pub pdf_csv: String,
    pub correlations: Vec<Correlation>,
    pub contamination: Vec<ContaminationRow>,
}

/// `datasets` are named instance lists; `reports` are named evaluation
/// reports over any of them. Resolution fractions average over reports.
pub fn analyze(
    datasets: &[(String, Vec<TaskInstance>)],
    reports: &[(String, EvalReport)],
    cutoff: Option<Date>,
) -> Result<Analysis, DiffError> {
    let mut chars: Vec<(String, Vec<(String, InstanceCharacteristics)>)> = Vec::new();
    for (name, instances) in datasets {
        let rows = instances
            .iter()
            .map(|i| characteristics(i).map(|c| (i.instance_id.clone(), c)))
            .collect::<Result<Vec<_>, _>>()?;
        chars.push((name.clone(), rows));
    }
    let flat: Vec<(String, Vec<InstanceCharacteristics>)> = chars
        .iter()
        .map(|(n, rows)| (n.clone(), rows.iter().map(|(_, c)| *c).collect()))
        .collect();
    let table: Vec<(&str, &[InstanceCharacteristics])> = flat.iter().map(|(n, c)| (n.as_str(), c.as_slice())).collect();

    let mut cdfs = Vec::new();
    let mut pdfs = Vec::new();
    for (name, rows) in &flat {
        if rows.is_empty() {
            continue;
        }
        for (metric, get) in DISTRIBUTIONS {
            let values: Vec<f64> = rows.iter().map(get).collect();
            cdfs.push((format!("{name}/{metric}"), cdf(&values)));
            pdfs.push((format!("{name}/{metric}"), pdf(&values)));
        }
    }
    let cdf_rows: Vec<(&str, Vec<(f64, f64)>)> = cdfs.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
    let pdf_rows: Vec<(&str, _)> = pdfs.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();

    let mut corr = Vec::new();
    if !reports.is_empty() {
        let mut tally: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        for (_, report) in reports {
            for r in &report.results {
                let t = tally.entry(r.instance_id.as_str()).or_default();
                t.1 += 1;
                t.0 += r.resolved as u64;
            }
        }
        let rows: Vec<(InstanceCharacteristics, f64)> = chars
            .iter()
            .flat_map(|(_, rows)| rows.iter())
            .filter_map(|(id, c)| tally.get(id.as_str()).map(|(s, n)| (*c, *s as f64 / *n as f64)))
            .collect();
        corr = correlations(&rows);
    }

    let mut contam = Vec::new();
    if let Some(kc) = cutoff {
        let all: Vec<TaskInstance> = datasets.iter().flat_map(|(_, i)| i.iter().cloned()).collect();
        for (name, report) in reports {
            let ids: BTreeMap<&str, ()> = report.results.iter().map(|r| (r.instance_id.as_str(), ())).collect();
            let covered: Vec<TaskInstance> = all
                .iter()
                .filter(|i| ids.contains_key(i.instance_id.as_str()))
                .cloned()
                .collect();
            contam.push(contamination(name, &covered, report, kc));
        }
    }

    Ok(Analysis {
        means_csv: means_csv(&table),
        cdf_csv: cdf_csv(&cdf_rows),
        pdf_csv: pdf_csv(&pdf_rows),
        correlations: corr,
        contamination: contam,
    })
}

fn correlations_csv(rows: &[Correlation]) -> String {
    let mut out = String::from("characteristic,n,rho,p_value\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.characteristic,
            c.n,
            opt(c.rho),
            opt(c.p_value)
        ));
    }
    out
}

/// Writes `means.csv`, `cdf.csv`, `pdf.csv`, and, when available,
/// `correlations.csv` and `contamination.json`.
pub fn write_analysis(dir: &Path, analysis: &Analysis) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("means.csv"), &analysis.means_csv)?;
    std::fs::write(dir.join("cdf.csv"), &analysis.cdf_csv)?;
    std::fs::write(dir.join("pdf.csv"), &analysis.pdf_csv)?;
    if !analysis.correlations.is_empty() {
        std::fs::write(dir.join("correlations.csv"), correlations_csv(&analysis.correlations))?;
    }
    if !analysis.contamination.is_empty() {
        let text = serde_json::to_string_pretty(&analysis.contamination).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("contamination.json"), text + "\n")?;
    }
    Ok(())
}
