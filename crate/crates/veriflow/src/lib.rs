//! Distributed verification of power-grid state over a partitioned radial
//! feeder.
//!
//! The crate models a radial distribution network, splits it into regions that
//! each see their own buses plus a one-bus overlap with every neighbour, and
//! runs a consensus ADMM loop in which regions repeatedly exchange boundary
//! state and refine local estimates until the stitched global state satisfies
//! the branch-flow constraints. Per-neighbour disagreement statistics feed a
//! random-walk trust score that localises a region injecting falsified data;
//! the offender can then be cut out and verification restarted on the
//! surviving components.
//!
//! Everything is generic over the scalar type through [`scalar::Scalar`];
//! `f64` aliases for the main types are exported at the crate root.

pub mod admm;
pub mod adversary;
pub mod error;
pub mod grid;
pub mod ledger;
pub mod partition;
pub mod linalg;
pub mod scalar;
pub mod trust;

pub use error::{Error, Result};

/// Radial network with `f64` parameters.
pub type GridNetwork = grid::GridNetwork<f64>;
/// Power-flow solution with `f64` entries.
pub type PowerFlowSolution = grid::PowerFlowSolution<f64>;
/// Constraint system with `f64` coefficients.
pub type ConstraintMatrix = grid::ConstraintMatrix<f64>;
/// Per-region consensus state with `f64` entries.
pub type AdmmState = admm::AdmmState<f64>;
/// Consensus parameters with `f64` entries.
pub type AdmmConfig = admm::AdmmConfig<f64>;
/// Merged global estimate with `f64` entries.
pub type GlobalEstimate = admm::GlobalEstimate<f64>;
