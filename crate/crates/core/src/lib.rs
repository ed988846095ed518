//! Rumor and virus spreading by independent random walks.
//!
//! The crate simulates the *broadcasting* (frog model) and *gossiping*
//! processes for `m` agents walking on square grids with boundary
//! self-loops, tori and rings, and ships the tooling needed to check the
//! simulator against ground truth:
//!
//! * [`topology`] and [`placement`] define the walk and the initial agent
//!   distribution (exact or binomial model).
//! * [`engine`] runs seeded, synchronous-time trials and optional traces.
//! * [`oracles`] computes exact finite-chain quantities (visit and meeting
//!   probabilities, collision counts) and Monte Carlo estimators.
//! * [`analysis`] decomposes agents into proximity islands and tracks the
//!   frontier and tessellation wavefront of a run.
//! * [`experiments`] drives parameter sweeps, fits power laws and compares
//!   candidate scaling laws.
//!
//! Trials are independent and are executed in parallel with rayon when the
//! `parallel` feature (on by default) is enabled; see [`par`].

pub mod analysis;
pub mod engine;
mod error;
pub mod experiments;
pub mod oracles;
pub mod par;
pub mod placement;
pub mod rng;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};
pub use topology::{Coord, NodeId, Topology, TopologyKind};
