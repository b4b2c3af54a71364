//! Pure building blocks of the benchgen pipeline.
//!
//! Everything in this crate is deterministic and allocation-only: the
//! test-behavior lattice and resolution check, the prompt catalog with the
//! parsers for each prompt's answer format, dependency pinning, interpreter
//! version resolution, unified-diff handling, test-runner report parsing, and
//! the dataset statistics. IO, containers, and network clients live in the
//! `benchgen` crate.

#![no_std]

extern crate alloc;

pub mod analytics;
pub mod answer;
pub mod behavior;
pub mod context;
pub mod dataset;
pub mod date;
pub mod diff;
pub mod excerpt;
pub mod markup;
pub mod pinning;
pub mod prompt;
pub mod python;
pub mod reference;
pub mod report;
pub mod threshold;

pub use behavior::{BehaviorMap, TestBehavior, TestStatus};
pub use date::Date;
pub use pinning::{pin_rewrite, CommandSet};
pub use report::{FrameworkId, TestReport};
