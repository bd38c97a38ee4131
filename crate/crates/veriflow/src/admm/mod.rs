//! Distributed state estimation by consensus.
//!
//! Each region refines a local copy of the variables it can see, exchanges
//! the shared boundary entries with its neighbors once per round, averages
//! what it receives, and nudges its next solve toward that average through a
//! running dual term. With honest exchanges the regional copies contract to
//! the pooled least-squares estimate that [`solve_centralized`] computes
//! directly; [`stitch`] merges the copies into one vector for comparison.
//!
//! The round structure is deliberately explicit rather than hidden behind a
//! driver loop: the caller performs the solve, the exchange, and the
//! averaging as separate steps so that message tampering, logging, and
//! disagreement monitoring can hook the exchange in between.

mod central;
mod config;
mod state;

pub use central::{solve_centralized, stitch, GlobalEstimate};
pub use config::{AdmmConfig, MeasurementSet, NoiseDescriptor};
pub use state::{
    consensus_gap, exchange_all, has_converged, initialize, psi_update, seed_consensus,
    seed_consensus_with, upsilon_update, x_update, AdmmState, Inbox, StartPolicy,
};
