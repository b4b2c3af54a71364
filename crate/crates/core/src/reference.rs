//! Previously accepted commands, reused for nearby versions of a repository.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::date::Date;
use crate::pinning::CommandSet;
use crate::report::FrameworkId;

pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub commit: String,
    pub commit_date: Date,
    pub cmds: CommandSet,
    pub parser: FrameworkId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceStore {
    pub version: u32,
    pub repos: BTreeMap<String, Vec<ReferenceEntry>>,
}

impl Default for ReferenceStore {
    fn default() -> Self {
        ReferenceStore {
            version: STORE_VERSION,
            repos: BTreeMap::new(),
        }
    }
}

impl ReferenceStore {
    /// Adds an entry, keeping each repository's list newest first. A commit
    /// already present is left untouched and `false` is returned.
    pub fn insert(&mut self, repo: &str, entry: ReferenceEntry) -> bool {
        let list = self.repos.entry(String::from(repo)).or_default();
        if list.iter().any(|e| e.commit == entry.commit) {
            return false;
        }
        let pos = list.partition_point(|e| e.commit_date >= entry.commit_date);
        list.insert(pos, entry);
        true
    }

    /// Restores the newest-first order, e.g. after loading a hand-edited file.
    pub fn normalize(&mut self) {
        for list in self.repos.values_mut() {
            list.sort_by_key(|e| core::cmp::Reverse(e.commit_date));
        }
    }

    pub fn entries(&self, repo: &str) -> &[ReferenceEntry] {
        self.repos.get(repo).map_or(&[], Vec::as_slice)
    }

    /// The entry closest in commit date; equidistant entries resolve to the
    /// later one.
    pub fn nearest(&self, repo: &str, date: Date) -> Option<&ReferenceEntry> {
        self.entries(repo)
            .iter()
            .min_by_key(|e| (date.days_until(&e.commit_date).abs(), core::cmp::Reverse(e.commit_date)))
    }
}

/// Commands of the nearest entry, re-pinned to `cutoff`.
pub fn lookup_reference(
    store: &ReferenceStore,
    repo: &str,
    commit_date: Date,
    cutoff: Date,
) -> Option<(CommandSet, FrameworkId)> {
    store
        .nearest(repo, commit_date)
        .map(|e| (e.cmds.repinned(cutoff), e.parser))
}
