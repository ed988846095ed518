//! Ground truth for the simulator.
//!
//! [`exact`] evolves probability vectors of the walk (and of the product
//! chain of two walks) on small topologies. [`montecarlo`] holds the
//! matching estimators for sizes where the dense chains no longer fit.

pub mod exact;
pub mod montecarlo;

pub use exact::{
    collision_count_exact, fitted_meeting_constant, fitted_visit_constant, meeting_probability_exact,
    pairs_at_distance, visit_probability_exact, visit_probability_series, DistVector, PairChainResult,
};
pub use montecarlo::{cover_time_mc, meeting_probability_mc, walk_statistics_mc, WalkStatistics};

/// `P · max(1, ln d)`, the quantity the visit and meeting lower bounds keep
/// bounded away from zero.
pub fn log_scaled_constant(probability: f64, distance: u32) -> f64 {
    probability * (distance as f64).ln().max(1.0)
}
