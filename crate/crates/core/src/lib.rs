//! Lower bounds, schedules, and statistical checks for reductions on
//! synchronous 2-D grid graphs.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs and an explicit seed; file formats, worker pools,
//! and the command-line front end live in the `gridfold` crate.
//!
//! Module map:
//!
//! - [`grid`]: grid and small-world graphs, BFS metrics, eccentricity.
//! - [`transport`]: transport work, support radius, exact Steiner cost.
//! - [`routing`]: XY routes, sink-trunk loads, deflection around failures.
//! - [`engine`]: the synchronous cycle engine (parallel shortest paths and
//!   wavefront tree folds).
//! - [`monoid`]: merge operators, law checks, fold trees.
//! - [`variance`]: the sink-trunk load functional and its moments.
//! - [`percolation`]: failure fields, clusters, tail fits, detour statistics.
//! - [`latency`]: collective cost models and the cluster/grid latency ratio.
#![no_std]
// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod engine;
mod error;
pub mod grid;
pub mod latency;
pub mod monoid;
pub mod percolation;
pub mod rng;
pub mod routing;
pub mod stats;
pub mod transport;
pub mod variance;

pub use error::{Error, Result};
pub use grid::{GridGraph, NodeId};
