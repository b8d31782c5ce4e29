//! Structural poisoning attacks against graph anomaly detectors.
//!
//! The crate bundles two detectors (the egonet power-law detector `oddball`
//! and a linearized two-layer GCN in `lgcn`), three edge-flip attacks over a
//! pluggable differentiable objective (`attack`), robust re-estimation of the
//! power law (`defense`), and the metrics used to judge attack strength and
//! unnoticeability (`eval`).

pub mod attack;
pub mod dataset;
pub mod defense;
pub mod error;
pub mod eval;
pub mod graph;
pub mod lgcn;
pub mod oddball;
pub mod relaxed;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{EdgeOp, Graph, OpKind, PerturbationPlan};
