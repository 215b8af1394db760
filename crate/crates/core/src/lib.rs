//! Minimum-latency aggregation convergecast toolkit.
//!
//! Data flows from every vertex of a connected graph to a sink along a
//! spanning tree; each vertex merges what it received and transmits exactly
//! once, a vertex never sends and receives in the same slot, and children of
//! a common parent use distinct slots. With enough frequency channels these
//! are the only conflicts, which makes the problem the time reversal of
//! telephone broadcasting.
//!
//! The crate provides:
//!
//! - [`graph`]: the immutable graph type plus breadth-first levels;
//! - [`generators`]: interconnection topologies and random models;
//! - [`tree`]: optimal scheduling of a fixed aggregation tree;
//! - [`gls`]: the genetic local search heuristic;
//! - [`oracle`]: exact optima and lower bounds for small instances;
//! - [`ip`]: both integer-programming formulations with LP emission;
//! - [`io`]: the text formats used by the command-line tools.

pub mod generators;
pub mod gls;
pub mod graph;
pub mod io;
pub mod ip;
pub mod oracle;
pub mod tree;

pub use graph::{Graph, GraphError, Levels, Vertex};
pub use tree::{
    apply_reattach, assign_slots, check_schedule, check_tree_schedule, latency, reattach_effect,
    AggregationTree, Schedule, TreeError, Violation,
};
