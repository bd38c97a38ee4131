//! Attacker localization from message disagreement.
//!
//! Every round, each region compares the boundary values it computed with the
//! copies its neighbors sent and folds the squared gap into a per-neighbor
//! disagreement score with a `1/k` averaging schedule. The scores of all
//! regions form a row-stochastic matrix whose stationary distribution
//! concentrates mass on the region the rest of the network disagrees with
//! most; once that distribution stops moving, a region whose score exceeds
//! the other regions' mean by a configurable number of standard deviations is
//! named as the attacker.

mod scores;
mod verdict;

pub use scores::{
    stationary_distribution, DisagreementSample, TrustConfig, TrustState,
};
pub use verdict::{check_verdict, excluded_stats, Verdict, VerdictOutcome};
