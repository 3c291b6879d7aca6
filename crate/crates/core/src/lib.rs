//! Instrumental-variable pattern mining over weighted causal knowledge graphs,
//! plus the supporting pipeline: weighted term-frequency features, a random
//! forest classifier, and a two-stage least squares engine with weak-instrument
//! diagnostics.
//!
//! Data-parallel loops (mining over instrument candidates, tree training,
//! per-document feature extraction, Monte Carlo sweeps) go through [`exec`].
//! With the `parallel` feature disabled they run sequentially and produce the
//! same output.

pub mod econ;
pub mod error;
pub mod exec;
pub mod forest;
pub mod graph;
pub mod miner;
pub mod synth;
pub mod textfeat;

pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{CausalGraph, Direction, NodeId, ReachabilitySpec};
pub use miner::{ExclusionMode, IvTriple, MiningStats, OverlapReport, Quality};

/// Version string embedded in JSON reports.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
