//! Learned QAOA parameter initialization for weighted and unweighted Max-Cut.
//!
//! The crate is organised as a pipeline:
//!
//! * [`graph`]: problem instances, generators, exact Max-Cut.
//! * [`qaoa`]: dense statevector simulation with adjoint gradients and Adam.
//! * [`normalize`]: symmetry-based canonicalization of optimal angles.
//! * [`dataset`]: labelled datasets of optimal angles, persisted as JSONL.
//! * [`gnn`]: a small graph neural network trained by hand-written backprop.
//! * [`bench`]: initialization schemes and the evaluation protocol.
//! * [`pipeline`]: end-to-end orchestration driven by a TOML config.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod normalize;
pub mod pipeline;
pub mod qaoa;
pub mod seed;

pub use error::{Error, Result};
pub use graph::{CutValue, Graph};
pub use qaoa::{OptimizationResult, ParamVector, StateVector};
