//! Geometric separation scoring and confidence calibration.
//!
//! The library turns a labeled training set into a per-input confidence
//! estimate in three stages:
//!
//! 1. [`geometry`] scores an input by how far it sits from the decision
//!    boundary between its predicted class and the rest of the training
//!    set (exact and fast lower-bound variants).
//! 2. [`calibration`] maps raw separation scores to probabilities with a
//!    monotone (isotonic) or parametric (logistic) fit on held-out data.
//! 3. [`metrics`] quantifies calibration quality via expected calibration
//!    error, and [`pipeline`] wires the stages into reproducible
//!    split/fit/evaluate experiments and throughput benchmarks.
//!
//! [`data`] holds the dataset container and CSV interchange formats shared
//! by all stages.

pub mod calibration;
pub mod data;
pub mod geometry;
pub mod metrics;
pub mod pipeline;

mod numfmt;

pub use numfmt::fmt_sig;
