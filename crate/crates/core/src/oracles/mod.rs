//! Independent reference solutions used to check the hierarchy.

pub mod analytic;
pub mod cascaded;
pub mod gate;
pub mod strong;
pub mod timebin;

pub use analytic::analytic_single_photon_pe;
pub use gate::{run_gate, GateCheck};
pub use cascaded::{cascaded_single_photon, CascadedTrajectory};
pub use strong::{small_bandwidth_recursion, strong_coupling_metrics, StrongCoupling};
pub use timebin::{timebin_brute_force, TimeBinResult};
