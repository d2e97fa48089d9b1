//! Nonconvex Lagrangians: the sets where f differs from f**, pyramidal surgery
//! on relaxed minimizers, and the covering repair that moves gradients out of
//! those sets.

mod components;
mod patch;
mod repair;

pub use components::{detect_components, GapOracle, NonconvexSet};
pub use patch::{apply_patch, build_patch, verify_energy_decrease, EnergyDecrease, SimplexPoint, SurgeryPatch};
pub use repair::{vitali_repair, PassLog, RepairParams, RepairReport, Repaired};
