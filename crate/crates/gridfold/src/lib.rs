//! Experiment runner for `gridfold-core`: worker pools, configuration,
//! file formats and the `gridfold` command line.
//!
//! Every experiment is a pure function of its [`config::ExperimentConfig`];
//! [`experiments::run`] validates the config, runs the experiment on a
//! [`runner::Rayon`] pool, writes the artifacts, and reports whether the
//! experiment's statistical checks held.

pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod runner;
pub mod smallworld;

pub use error::RunError;
