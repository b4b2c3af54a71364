//! Interpreter version resolution against packaging metadata and a cutoff.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::date::Date;

/// Release date of the first final release of each interpreter minor line.
pub const INTERPRETER_RELEASES: &[(u32, u32, (i32, u8, u8))] = &[
    (2, 7, (2010, 7, 3)),
    (3, 0, (2008, 12, 3)),
    (3, 1, (2009, 6, 27)),
    (3, 2, (2011, 2, 20)),
    (3, 3, (2012, 9, 29)),
    (3, 4, (2014, 3, 16)),
    (3, 5, (2015, 9, 13)),
    (3, 6, (2016, 12, 23)),
    (3, 7, (2018, 6, 27)),
    (3, 8, (2019, 10, 14)),
    (3, 9, (2020, 10, 5)),
    (3, 10, (2021, 10, 4)),
    (3, 11, (2022, 10, 24)),
    (3, 12, (2023, 10, 2)),
    (3, 13, (2024, 10, 7)),
    (3, 14, (2025, 10, 7)),
];

/// Highest patch number probed when deciding whether a minor line can
/// satisfy a specifier such as `>=3.6.2` or `!=3.7.0`.
const MAX_PATCH: u32 = 30;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PythonError {
    #[error("no interpreter released by {cutoff} satisfies `{constraint}`")]
    UnsatisfiableConstraint { constraint: String, cutoff: Date },
    #[error("invalid version specifier `{0}`")]
    InvalidSpecifier(String),
}

pub fn release_date(major: u32, minor: u32) -> Option<Date> {
    INTERPRETER_RELEASES
        .iter()
        .find(|(ma, mi, _)| *ma == major && *mi == minor)
        .and_then(|(_, _, (y, m, d))| Date::new(*y, *m, *d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Ge,
    Le,
    Gt,
    Lt,
    Eq,
    Ne,
    Compatible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Clause {
    op: Op,
    release: Vec<u32>,
    wildcard: bool,
}

fn cmp_release(a: &[u32], b: &[u32]) -> Ordering {
    let n = a.len().max(b.len());
    for i in 0..n {
        let x = a.get(i).copied().unwrap_or(0);
        let y = b.get(i).copied().unwrap_or(0);
        match x.cmp(&y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    Ordering::Equal
}

fn prefix_match(v: &[u32], prefix: &[u32]) -> bool {
    prefix
        .iter()
        .enumerate()
        .all(|(i, p)| v.get(i).copied().unwrap_or(0) == *p)
}

impl Clause {
    fn matches(&self, v: &[u32]) -> bool {
        let ord = cmp_release(v, &self.release);
        match self.op {
            Op::Eq if self.wildcard => prefix_match(v, &self.release),
            Op::Ne if self.wildcard => !prefix_match(v, &self.release),
            Op::Eq => ord == Ordering::Equal,
            Op::Ne => ord != Ordering::Equal,
            Op::Ge => ord != Ordering::Less,
            Op::Le => ord != Ordering::Greater,
            Op::Gt => ord == Ordering::Greater,
            Op::Lt => ord == Ordering::Less,
            Op::Compatible => {
                let prefix = &self.release[..self.release.len().saturating_sub(1).max(1)];
                ord != Ordering::Less && prefix_match(v, prefix)
            }
        }
    }
}

/// A conjunction of version clauses, e.g. `>=3.8,<3.11`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionSpec {
    text: String,
    clauses: Vec<Clause>,
}

impl VersionSpec {
    pub fn parse(text: &str) -> Result<VersionSpec, PythonError> {
        let invalid = || PythonError::InvalidSpecifier(text.to_string());
        let mut clauses = Vec::new();
        for raw in text.split(',') {
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let (op, rest) = [
                ("===", Op::Eq),
                ("~=", Op::Compatible),
                (">=", Op::Ge),
                ("<=", Op::Le),
                ("==", Op::Eq),
                ("!=", Op::Ne),
                (">", Op::Gt),
                ("<", Op::Lt),
            ]
            .iter()
            .find_map(|(sym, op)| raw.strip_prefix(sym).map(|r| (*op, r.trim())))
            .ok_or_else(invalid)?;
            let (body, wildcard) = match rest.strip_suffix(".*") {
                Some(b) => (b, true),
                None => (rest, false),
            };
            if wildcard && !matches!(op, Op::Eq | Op::Ne) {
                return Err(invalid());
            }
            let release = body
                .split('.')
                .map(|p| p.parse::<u32>().map_err(|_| invalid()))
                .collect::<Result<Vec<_>, _>>()?;
            if release.is_empty() || (op == Op::Compatible && release.len() < 2) {
                return Err(invalid());
            }
            clauses.push(Clause { op, release, wildcard });
        }
        if clauses.is_empty() {
            return Err(invalid());
        }
        Ok(VersionSpec {
            text: text.trim().to_string(),
            clauses,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn matches(&self, version: &[u32]) -> bool {
        self.clauses.iter().all(|c| c.matches(version))
    }

    /// True if some release of the `major.minor` line satisfies the spec.
    pub fn admits_minor(&self, major: u32, minor: u32) -> bool {
        (0..=MAX_PATCH).any(|patch| self.matches(&[major, minor, patch]))
    }
}

/// Interpreter constraint found in packaging metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PythonConstraint {
    /// A `requires-python` / `python_requires` specifier.
    Specifier(VersionSpec),
    /// Versions listed through trove classifiers.
    Listed(Vec<(u32, u32)>),
}

impl PythonConstraint {
    pub fn admits_minor(&self, major: u32, minor: u32) -> bool {
        match self {
            PythonConstraint::Specifier(spec) => spec.admits_minor(major, minor),
            PythonConstraint::Listed(list) => list.contains(&(major, minor)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PythonConstraint::Specifier(spec) => spec.as_str().to_string(),
            PythonConstraint::Listed(list) => {
                let names: Vec<String> = list.iter().map(|(a, b)| format!("{a}.{b}")).collect();
                format!("classifiers {}", names.join(", "))
            }
        }
    }
}

/// Highest interpreter minor version released on or before `cutoff` that the
/// constraint admits; with no constraint, the newest one released by then.
pub fn resolve_python_version(constraint: Option<&PythonConstraint>, cutoff: Date) -> Result<String, PythonError> {
    INTERPRETER_RELEASES
        .iter()
        .filter(|(ma, mi, _)| release_date(*ma, *mi).is_some_and(|d| d <= cutoff))
        .filter(|(ma, mi, _)| constraint.is_none_or(|c| c.admits_minor(*ma, *mi)))
        .map(|(ma, mi, _)| (*ma, *mi))
        .max()
        .map(|(ma, mi)| format!("{ma}.{mi}"))
        .ok_or_else(|| PythonError::UnsatisfiableConstraint {
            constraint: constraint.map(PythonConstraint::describe).unwrap_or_default(),
            cutoff,
        })
}

fn quoted_value(rest: &str) -> Option<&str> {
    let rest = rest.trim_start();
    let q = rest.chars().next()?;
    if q != '"' && q != '\'' {
        return None;
    }
    let inner = &rest[1..];
    inner.find(q).map(|end| &inner[..end])
}

fn value_after(line: &str, key: &str, seps: &[char]) -> Option<String> {
    let idx = line.find(key)?;
    let before = &line[..idx];
    if before
        .chars()
        .last()
        .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '-')
    {
        return None;
    }
    let rest = line[idx + key.len()..].trim_start();
    let rest = rest.strip_prefix(|c| seps.contains(&c))?;
    match quoted_value(rest) {
        Some(v) => Some(v.to_string()),
        None => {
            let v = rest.trim().trim_end_matches(',');
            (!v.is_empty()).then(|| v.to_string())
        }
    }
}

/// Scans packaging files (`(name, content)` pairs) for an interpreter
/// constraint. Explicit specifiers win over classifiers.
pub fn find_constraint(files: &[(&str, &str)]) -> Option<PythonConstraint> {
    for (name, content) in files {
        let base = name.rsplit('/').next().unwrap_or(name);
        let (key, seps): (&str, &[char]) = match base {
            "pyproject.toml" => ("requires-python", &['=']),
            "setup.cfg" => ("python_requires", &['=', ':']),
            "setup.py" => ("python_requires", &['=']),
            _ => continue,
        };
        for line in content.lines() {
            if line.trim_start().starts_with('#') {
                continue;
            }
            if let Some(v) = value_after(line, key, seps) {
                if let Ok(spec) = VersionSpec::parse(&v) {
                    return Some(PythonConstraint::Specifier(spec));
                }
            }
        }
    }
    let mut listed: Vec<(u32, u32)> = Vec::new();
    for (_, content) in files {
        let mut rest: &str = content;
        const MARK: &str = "Programming Language :: Python :: ";
        while let Some(i) = rest.find(MARK) {
            rest = &rest[i + MARK.len()..];
            let ver: String = rest.chars().take_while(|c| c.is_ascii_digit() || *c == '.').collect();
            let mut parts = ver.split('.');
            if let (Some(Ok(a)), Some(Ok(b))) = (parts.next().map(str::parse), parts.next().map(str::parse)) {
                if !listed.contains(&(a, b)) {
                    listed.push((a, b));
                }
            }
        }
    }
    (!listed.is_empty()).then(|| {
        listed.sort_unstable();
        PythonConstraint::Listed(listed)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> Date {
        s.parse().unwrap()
    }

    fn spec(s: &str) -> PythonConstraint {
        PythonConstraint::Specifier(VersionSpec::parse(s).unwrap())
    }

    #[test]
    fn resolves_examples() {
        assert_eq!(
            resolve_python_version(Some(&spec(">=3.8,<3.11")), date("2022-04-11")).unwrap(),
            "3.10"
        );
        assert_eq!(resolve_python_version(None, date("2019-01-01")).unwrap(), "3.7");
        assert!(matches!(
            resolve_python_version(Some(&spec(">=4.0")), date("2025-01-01")),
            Err(PythonError::UnsatisfiableConstraint { .. })
        ));
    }

    #[test]
    fn specifier_semantics() {
        let s = VersionSpec::parse(">=2.7, !=3.0.*, !=3.1.*, !=3.2.*").unwrap();
        assert!(s.admits_minor(2, 7));
        assert!(!s.admits_minor(3, 1));
        assert!(s.admits_minor(3, 3));
        let c = VersionSpec::parse("~=3.6").unwrap();
        assert!(c.admits_minor(3, 9) && !c.admits_minor(3, 5) && !c.admits_minor(4, 0));
        let c = VersionSpec::parse("~=3.6.1").unwrap();
        assert!(c.admits_minor(3, 6) && !c.admits_minor(3, 7));
        assert!(VersionSpec::parse("==3.7.*").unwrap().admits_minor(3, 7));
        assert!(VersionSpec::parse(">=3.6.2").unwrap().admits_minor(3, 6));
        assert!(!VersionSpec::parse("<3.7").unwrap().admits_minor(3, 7));
        assert!(VersionSpec::parse(">3.7").unwrap().admits_minor(3, 7));
        assert!(VersionSpec::parse("banana").is_err());
    }

    #[test]
    fn finds_constraints_in_metadata() {
        let py = "[project]\nname = \"x\"\nrequires-python = \">=3.8\"\n";
        assert_eq!(find_constraint(&[("pyproject.toml", py)]), Some(spec(">=3.8")));
        let setup = "setup(\n    name='x',\n    python_requires='>=3.6, <4',\n)";
        assert_eq!(find_constraint(&[("setup.py", setup)]), Some(spec(">=3.6, <4")));
        let cfg = "[options]\npython_requires = >=3.7\n";
        assert_eq!(find_constraint(&[("setup.cfg", cfg)]), Some(spec(">=3.7")));
        let cls = "classifiers=[\n 'Programming Language :: Python :: 3.6',\n 'Programming Language :: Python :: 3.7',\n 'Programming Language :: Python :: 3',\n]";
        assert_eq!(
            find_constraint(&[("setup.py", cls)]),
            Some(PythonConstraint::Listed(alloc::vec![(3, 6), (3, 7)]))
        );
        assert_eq!(find_constraint(&[("README.md", "requires-python = \">=3.8\"")]), None);
    }
}
