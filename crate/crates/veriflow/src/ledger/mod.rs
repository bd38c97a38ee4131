//! Tamper-evident run records.
//!
//! Every quantity a region contributes to the verification round, and every
//! aggregate the detection layer derives, lands in an append-only hash chain:
//! each entry's SHA-256 commits to its predecessor, so editing any historical
//! entry invalidates everything after it. Payloads are canonical
//! little-endian `f64` bytes, which makes two runs comparable byte for byte
//! and lets an auditor replay a run and diff it against the recorded chains.

mod chain;
mod set;

pub use chain::{
    decode_scalars, encode_scalars, genesis_hash, EntryKind, Ledger, LedgerEntry,
};
pub use set::LedgerSet;
