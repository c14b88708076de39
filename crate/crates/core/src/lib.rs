//! Queue-length estimation at signalized multi-lane junctions from probe
//! (connected) vehicle data.
//!
//! The crate is organised along the estimation pipeline:
//!
//! * [`assignment`] solves the lane-assignment matrix `W` from turn ratios and
//!   junction topology (a small box/equality constrained QP).
//! * [`sim`] is a discrete-event simulator of one signalized approach that
//!   produces per-cycle observations with ground truth.
//! * [`estimators`] recovers the primary parameters (penetration ratio,
//!   arrival rate, turn ratios) and per-lane probe counts from a trace.
//! * [`queue_dist`] holds the three queue-length distributions and their
//!   combinatorial building blocks.
//! * [`pipeline`] chains the above into per-cycle queue estimates.
//! * [`nlane`] applies the three-lane estimators to wider roads through
//!   overlapping virtual three-lane windows.
//! * [`harness`] runs replicated experiments and writes CSV outputs.
//!
//! Replications and other batch work fan out through [`par`], which uses
//! rayon when the `parallel` feature is enabled and runs sequentially
//! otherwise.

pub mod assignment;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod nlane;
pub mod par;
pub mod pipeline;
pub mod queue_dist;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
