//! Test statuses, behaviors across a patch, and the resolution check.
//!
//! A test either passes or fails on a codebase; its behavior across a patch
//! is the pair (before, after). Behaviors are partially ordered by
//! `F→P > F→F` and `P→P > P→F`; pairs with different pre-statuses are
//! incomparable. A candidate patch resolves a task when every reference test
//! behaves at least as well under the candidate as under the reference fix.

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Outcome of a single test run. Any terminal state other than a clean pass
/// (errors, crashes, collection failures, absence) is `Fail`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TestStatus {
    #[serde(rename = "F")]
    Fail,
    #[serde(rename = "P")]
    Pass,
}

impl TestStatus {
    pub fn symbol(self) -> char {
        match self {
            TestStatus::Pass => 'P',
            TestStatus::Fail => 'F',
        }
    }
}

/// Transition of one test from the original to the patched codebase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TestBehavior {
    pub pre: TestStatus,
    pub post: TestStatus,
}

impl TestBehavior {
    pub const FAIL_TO_PASS: TestBehavior = TestBehavior::new(TestStatus::Fail, TestStatus::Pass);
    pub const FAIL_TO_FAIL: TestBehavior = TestBehavior::new(TestStatus::Fail, TestStatus::Fail);
    pub const PASS_TO_PASS: TestBehavior = TestBehavior::new(TestStatus::Pass, TestStatus::Pass);
    pub const PASS_TO_FAIL: TestBehavior = TestBehavior::new(TestStatus::Pass, TestStatus::Fail);

    pub const ALL: [TestBehavior; 4] = [
        TestBehavior::PASS_TO_PASS,
        TestBehavior::FAIL_TO_PASS,
        TestBehavior::FAIL_TO_FAIL,
        TestBehavior::PASS_TO_FAIL,
    ];

    pub const fn new(pre: TestStatus, post: TestStatus) -> TestBehavior {
        TestBehavior { pre, post }
    }

    /// `true` iff `self ≥ other` in the behavior order. Incomparable pairs
    /// (different pre-statuses) yield `false`.
    pub fn geq(self, other: TestBehavior) -> bool {
        self.pre == other.pre && self.post >= other.post
    }

    /// Short ASCII label, e.g. `F->P`.
    pub fn label(self) -> &'static str {
        match (self.pre, self.post) {
            (TestStatus::Fail, TestStatus::Pass) => "F->P",
            (TestStatus::Fail, TestStatus::Fail) => "F->F",
            (TestStatus::Pass, TestStatus::Pass) => "P->P",
            (TestStatus::Pass, TestStatus::Fail) => "P->F",
        }
    }

    fn from_label(label: &str) -> Option<TestBehavior> {
        TestBehavior::ALL.into_iter().find(|b| b.label() == label)
    }
}

pub fn behavior_of(pre: TestStatus, post: TestStatus) -> TestBehavior {
    TestBehavior::new(pre, post)
}

pub fn behavior_geq(a: TestBehavior, b: TestBehavior) -> bool {
    a.geq(b)
}

impl fmt::Display for TestBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}→{}", self.pre.symbol(), self.post.symbol())
    }
}

impl Serialize for TestBehavior {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for TestBehavior {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        TestBehavior::from_label(&s).ok_or_else(|| serde::de::Error::custom(alloc::format!("unknown behavior `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BehaviorError {
    #[error("test identifiers must be non-empty")]
    EmptyId,
    #[error("duplicate test identifier `{0}`")]
    DuplicateId(String),
    #[error("reference test `{0}` is missing from the candidate run")]
    MissingTest(String),
    #[error("test `{0}` has different pre-statuses in reference and candidate runs")]
    PreStatusMismatch(String),
}

/// Behaviors keyed by test identifier. Identifiers are unique and non-empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, TestBehavior>", into = "BTreeMap<String, TestBehavior>")]
pub struct BehaviorMap {
    entries: BTreeMap<String, TestBehavior>,
}

impl TryFrom<BTreeMap<String, TestBehavior>> for BehaviorMap {
    type Error = BehaviorError;

    fn try_from(entries: BTreeMap<String, TestBehavior>) -> Result<Self, Self::Error> {
        if entries.keys().any(|k| k.is_empty()) {
            return Err(BehaviorError::EmptyId);
        }
        Ok(BehaviorMap { entries })
    }
}

impl From<BehaviorMap> for BTreeMap<String, TestBehavior> {
    fn from(map: BehaviorMap) -> Self {
        map.entries
    }
}

impl BehaviorMap {
    pub fn new() -> BehaviorMap {
        BehaviorMap::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, behavior: TestBehavior) -> Result<(), BehaviorError> {
        let id = id.into();
        if id.is_empty() {
            return Err(BehaviorError::EmptyId);
        }
        if self.entries.contains_key(&id) {
            return Err(BehaviorError::DuplicateId(id));
        }
        self.entries.insert(id, behavior);
        Ok(())
    }

    /// Inserts or overwrites.
    pub fn set(&mut self, id: impl Into<String>, behavior: TestBehavior) -> Result<(), BehaviorError> {
        let id = id.into();
        if id.is_empty() {
            return Err(BehaviorError::EmptyId);
        }
        self.entries.insert(id, behavior);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<TestBehavior> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, TestBehavior)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Ids with the given behavior, in identifier order.
    pub fn ids_with(&self, behavior: TestBehavior) -> impl Iterator<Item = &str> {
        self.iter().filter(move |(_, b)| *b == behavior).map(|(id, _)| id)
    }

    /// Keeps only the entries whose id satisfies `keep`.
    pub fn restricted(&self, mut keep: impl FnMut(&str) -> bool) -> BehaviorMap {
        BehaviorMap {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }
}

impl<S: Into<String>> FromIterator<(S, TestBehavior)> for BehaviorMap {
    /// Later duplicates overwrite earlier ones; empty ids are skipped.
    fn from_iter<I: IntoIterator<Item = (S, TestBehavior)>>(iter: I) -> Self {
        let mut map = BehaviorMap::new();
        for (id, b) in iter {
            let _ = map.set(id, b);
        }
        map
    }
}

/// Whether `candidate` matches or improves on `reference` for every
/// reference test. Tests only present in `candidate` are ignored.
pub fn is_resolved(reference: &BehaviorMap, candidate: &BehaviorMap) -> Result<bool, BehaviorError> {
    let mut resolved = true;
    for (id, want) in reference.iter() {
        let got = candidate.get(id).ok_or_else(|| BehaviorError::MissingTest(id.into()))?;
        if got.pre != want.pre {
            return Err(BehaviorError::PreStatusMismatch(id.into()));
        }
        resolved &= got.geq(want);
    }
    Ok(resolved)
}

/// Number of tests per behavior.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorCounts {
    pub pass_to_pass: usize,
    pub fail_to_pass: usize,
    pub fail_to_fail: usize,
    pub pass_to_fail: usize,
}

impl BehaviorCounts {
    pub fn total(&self) -> usize {
        self.pass_to_pass + self.fail_to_pass + self.fail_to_fail + self.pass_to_fail
    }

    pub fn get(&self, behavior: TestBehavior) -> usize {
        match behavior.label() {
            "P->P" => self.pass_to_pass,
            "F->P" => self.fail_to_pass,
            "F->F" => self.fail_to_fail,
            _ => self.pass_to_fail,
        }
    }
}

pub fn classify(map: &BehaviorMap) -> BehaviorCounts {
    let mut counts = BehaviorCounts::default();
    for (_, b) in map.iter() {
        let slot = match (b.pre, b.post) {
            (TestStatus::Pass, TestStatus::Pass) => &mut counts.pass_to_pass,
            (TestStatus::Fail, TestStatus::Pass) => &mut counts.fail_to_pass,
            (TestStatus::Fail, TestStatus::Fail) => &mut counts.fail_to_fail,
            (TestStatus::Pass, TestStatus::Fail) => &mut counts.pass_to_fail,
        };
        *slot += 1;
    }
    counts
}
