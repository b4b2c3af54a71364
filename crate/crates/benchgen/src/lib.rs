//! Environment setup agent and benchmark pipeline: LLM access, sandboxes,
//! forge clients, the three setup phases, dataset building, evaluation, and
//! analysis outputs.

pub mod agent;
pub mod analyze;
pub mod builder;
pub mod config;
pub mod extraction;
pub mod fetch;
pub mod forge;
pub mod harness;
pub mod improve;
pub mod llm;
pub mod repo;
pub mod sandbox;
pub mod session;
pub mod validation;
