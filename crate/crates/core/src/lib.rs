//! Bit-flip fault injection for untrained message-passing graph neural networks.
//!
//! The crate measures how flips in the binary32 weights of DS, GIN and GCN
//! models erode their 1-WL expressivity. It is organised bottom-up:
//!
//! * [`graph`] holds labeled graphs, TUDataset ingestion and dataset statistics.
//! * [`wl`] implements 1-WL color refinement, WL differences and subdivision ratios.
//! * [`nn`] is a dense binary32 forward engine with canonical-order aggregation.
//! * [`faults`] addresses IEEE-754 bit fields, injects flips and plans targeted attacks.
//! * [`metrics`] computes δ-distinctness, `Exp`, `S_GNN` and the unique mapping ratio `M`.
//! * [`bounds`] evaluates the closed-form bit-flip bounds on observed domains.
//! * [`stats`] provides Spearman and Pearson correlation with t-based p-values.
//! * [`harness`] runs seeded sweeps and writes CSV results and reports.

pub mod bounds;
pub mod error;
pub mod faults;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod stats;
pub mod wl;

pub use error::{Error, Result};
pub use graph::{DatasetStats, GraphDataset, LabeledGraph, NodeRef};
pub use metrics::{MetricReport, EPS_MACH};
pub use nn::{Activation, Architecture, GnnModel, LayerId, Matrix32, ModelSpec};
pub use wl::WlColoring;
