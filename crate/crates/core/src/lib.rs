//! Correlation clustering cost estimation over node-arrival streams.
//!
//! Nodes arrive one at a time; edges are never stored but computed on demand
//! from a [`similarity::SimilarityOracle`] whenever both endpoints are held in
//! memory. The crate provides:
//!
//! * the pivot family: offline `Pivot`, recursive `PrunedPivot`, the
//!   reference-set restricted `FindPivot` and a multi-pass streaming
//!   `PrunedPivot` ([`clustering`]);
//! * the sublinear-space cost estimators built on top of them, `Est-EA`,
//!   `Est-EB`, the combined `C4Approx` and a `SimpleSampling` baseline
//!   ([`estimators`]);
//! * exact offline ground truth ([`mismatch`], [`exact`]);
//! * lower-bound instance generators ([`gadgets`]);
//! * a pass scheduler with word/pass/query accounting ([`stream`]);
//! * dataset ingestion, synthetic generators and an experiment harness
//!   ([`io`], [`generate`], [`experiment`]).

pub mod clustering;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod experiment;
pub mod gadgets;
pub mod generate;
pub mod io;
pub mod mismatch;
pub mod rank;
pub mod similarity;
pub mod stream;

pub use clustering::{Clustering, ReferenceSet};
pub use error::{Error, Result};
pub use rank::RankFunction;
pub use similarity::{NodeId, SimilarityOracle};
pub use stream::{Accounting, NodeStream};
