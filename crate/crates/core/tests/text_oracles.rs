use benchgen_core::analytics::lcs::{longest_common_substring, normalize_whitespace};
use benchgen_core::answer::{parse_answer_list, parse_bash_block, parse_labeled, parse_links, render_bash_block};
use benchgen_core::diff::{self, is_test_file, split_patch};
use benchgen_core::python::{resolve_python_version, PythonConstraint, VersionSpec, INTERPRETER_RELEASES};
use benchgen_core::Date;
use proptest::prelude::*;

fn lcs_dp(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev = vec![0usize; b.len() + 1];
    let mut best = 0;
    for i in 1..=a.len() {
        let mut cur = vec![0usize; b.len() + 1];
        for j in 1..=b.len() {
            if a[i - 1] == b[j - 1] {
                cur[j] = prev[j - 1] + 1;
                best = best.max(cur[j]);
            }
        }
        prev = cur;
    }
    best
}

fn file_section(path: &str, hunks: &[(Vec<String>, Vec<String>)]) -> String {
    let mut out = format!("diff --git a/{path} b/{path}\n--- a/{path}\n+++ b/{path}\n");
    let mut line = 1;
    for (removed, added) in hunks {
        out.push_str(&format!(
            "@@ -{line},{} +{line},{} @@\n",
            removed.len() + 1,
            added.len() + 1
        ));
        out.push_str(" context\n");
        for r in removed {
            out.push_str(&format!("-{r}\n"));
        }
        for a in added {
            out.push_str(&format!("+{a}\n"));
        }
        line += 10;
    }
    out
}

fn path() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,6}/[a-z]{1,6}\\.py",
        "tests/test_[a-z]{1,6}\\.py",
        "[a-z]{1,6}/tests/[a-z]{1,6}\\.py",
        "[a-z]{1,6}_test\\.py",
        "docs/[a-z]{1,6}\\.rst",
    ]
}

fn hunk() -> impl Strategy<Value = (Vec<String>, Vec<String>)> {
    (
        prop::collection::vec("[a-z =()]{0,20}", 0..4),
        prop::collection::vec("[a-z =()]{0,20}", 0..4),
    )
}

fn release_oracle(lo: u32, hi: u32, cutoff: Date) -> Option<String> {
    let mut best: Option<(u32, u32)> = None;
    for (ma, mi, (y, m, d)) in INTERPRETER_RELEASES {
        let released = Date::new(*y, *m, *d).unwrap();
        if released <= cutoff && *ma == 3 && *mi >= lo && *mi < hi && best.is_none_or(|b| (*ma, *mi) > b) {
            best = Some((*ma, *mi));
        }
    }
    best.map(|(a, b)| format!("{a}.{b}"))
}

proptest! {
    #[test]
    fn lcs_matches_dynamic_programming(a in "[ab c]{0,40}", b in "[ab c]{0,40}") {
        prop_assert_eq!(longest_common_substring(&a, &b), lcs_dp(&a, &b));
        let (na, nb) = (normalize_whitespace(&a), normalize_whitespace(&b));
        prop_assert!(longest_common_substring(&na, &nb) <= na.chars().count());
    }

    #[test]
    fn split_patch_is_a_partition(files in prop::collection::btree_map(path(), prop::collection::vec(hunk(), 1..3), 0..6)) {
        let sections: Vec<String> = files.iter().map(|(p, h)| file_section(p, h)).collect();
        let text = sections.concat();
        let (code, tests) = split_patch(&text).unwrap();
        let code_files = diff::parse(&code).unwrap().files;
        let test_files = diff::parse(&tests).unwrap().files;
        prop_assert!(code_files.iter().all(|f| !is_test_file(f.path())));
        prop_assert!(test_files.iter().all(|f| is_test_file(f.path())));
        let mut rejoined: Vec<String> = code_files.iter().chain(&test_files).map(|f| f.text.clone()).collect();
        let mut original = sections.clone();
        rejoined.sort();
        original.sort();
        prop_assert_eq!(rejoined, original);
        let hunks = |fs: &[diff::FilePatch]| fs.iter().map(|f| f.hunks.len()).sum::<usize>();
        prop_assert_eq!(hunks(&code_files) + hunks(&test_files), files.values().map(Vec::len).sum::<usize>());
    }

    #[test]
    fn bash_block_round_trip(cmds in prop::collection::vec("[a-z][a-z0-9 ./=_-]{0,30}[a-z0-9]", 0..8)) {
        let parsed = parse_bash_block(&render_bash_block(&cmds)).unwrap();
        prop_assert_eq!(parsed, cmds.iter().map(|c| c.trim().to_string()).collect::<Vec<_>>());
    }

    #[test]
    fn answer_parsers_are_total(text in "(?s).{0,300}") {
        let _ = parse_bash_block(&text);
        let _ = parse_answer_list(&text);
        let _ = parse_labeled(&text, "RESULT", &["PYTHON", "INSTALLATION", "TESTING", "UNDECIDABLE"]);
        let _ = parse_labeled(&text, "", &["YES", "NO"]);
        let _ = parse_links(&text);
        let _ = diff::parse(&text);
    }

    #[test]
    fn python_resolution_matches_release_table(lo in 0u32..15, span in 1u32..6, days in 0i64..7000) {
        let cutoff = Date::new(2008, 1, 1).unwrap();
        let cutoff = Date::from_days_since_epoch(cutoff.days_since_epoch() + days);
        let hi = lo + span;
        let spec = PythonConstraint::Specifier(VersionSpec::parse(&format!(">=3.{lo},<3.{hi}")).unwrap());
        prop_assert_eq!(resolve_python_version(Some(&spec), cutoff).ok(), release_oracle(lo, hi, cutoff));
        let later = Date::from_days_since_epoch(cutoff.days_since_epoch() + 400);
        if let (Ok(a), Ok(b)) = (resolve_python_version(Some(&spec), cutoff), resolve_python_version(Some(&spec), later)) {
            let minor = |v: &str| v.split('.').nth(1).unwrap().parse::<u32>().unwrap();
            prop_assert!(minor(&b) >= minor(&a));
        }
    }
}

#[test]
fn python_examples() {
    let d = |s: &str| s.parse::<Date>().unwrap();
    let spec = PythonConstraint::Specifier(VersionSpec::parse(">=3.8,<3.11").unwrap());
    assert_eq!(resolve_python_version(Some(&spec), d("2022-04-11")).unwrap(), "3.10");
    assert_eq!(release_oracle(8, 11, d("2022-04-11")).as_deref(), Some("3.10"));
    assert_eq!(resolve_python_version(None, d("2019-01-01")).unwrap(), "3.7");
    let never = PythonConstraint::Specifier(VersionSpec::parse(">=4.0").unwrap());
    assert!(resolve_python_version(Some(&never), d("2024-01-01")).is_err());
}
