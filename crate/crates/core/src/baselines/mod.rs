//! Comparison algorithms and test oracles.

pub mod brute;
pub mod greedy;
pub mod monte_carlo;
pub mod rounding;

pub use brute::{brute_force_optimal, OracleBudget};
pub use greedy::{greedy, greedy_gsp};
pub use monte_carlo::{monte_carlo_sa1, monte_carlo_sa2, sa2_placement_frequencies, McEstimate};
pub use rounding::lp_rounding;

/// Capacity check shared by the baselines, matching `check_feasible` at the default tolerance.
pub(crate) fn fits(load: f64, size: f64, capacity: f64) -> bool {
    load + size <= capacity * (1.0 + crate::model::DEFAULT_FEASIBILITY_TOLERANCE)
}
