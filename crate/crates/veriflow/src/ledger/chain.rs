use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// What a ledger entry records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EntryKind {
    Measurements,
    AdmmState,
    SharedSlice,
    Disagreement,
    TrustScore,
    Verdict,
}

impl EntryKind {
    pub fn label(self) -> &'static str {
        match self {
            EntryKind::Measurements => "measurements",
            EntryKind::AdmmState => "admm_state",
            EntryKind::SharedSlice => "shared_slice",
            EntryKind::Disagreement => "disagreement",
            EntryKind::TrustScore => "trust_score",
            EntryKind::Verdict => "verdict",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        Ok(match label {
            "measurements" => EntryKind::Measurements,
            "admm_state" => EntryKind::AdmmState,
            "shared_slice" => EntryKind::SharedSlice,
            "disagreement" => EntryKind::Disagreement,
            "trust_score" => EntryKind::TrustScore,
            "verdict" => EntryKind::Verdict,
            other => return Err(Error::Ledger(format!("unknown entry kind `{other}`"))),
        })
    }
}

/// One append-only record. The hash commits to the previous entry's hash,
/// the author, the kind label, the round, and the raw payload bytes, in that
/// order, so any later rewrite of an earlier entry breaks every hash after
/// it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEntry {
    pub author: usize,
    pub kind: EntryKind,
    pub round: usize,
    pub payload: Vec<u8>,
    pub hash: [u8; 32],
}

fn entry_hash(
    prev: &[u8; 32],
    author: usize,
    kind: EntryKind,
    round: usize,
    payload: &[u8],
) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(prev);
    hasher.update((author as u64).to_le_bytes());
    hasher.update(kind.label().as_bytes());
    hasher.update((round as u64).to_le_bytes());
    hasher.update(payload);
    hasher.finalize().into()
}

/// Hash every chain starts from.
pub fn genesis_hash() -> [u8; 32] {
    Sha256::digest(b"state-verification-ledger-genesis-v1").into()
}

/// An append-only hash chain of entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    name: String,
    entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn new(name: impl Into<String>) -> Self {
        Ledger {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    /// Hash of the latest entry, or the genesis hash when empty.
    pub fn head_hash(&self) -> [u8; 32] {
        self.entries
            .last()
            .map(|e| e.hash)
            .unwrap_or_else(genesis_hash)
    }

    /// Appends an entry, chaining its hash to the current head.
    pub fn append(
        &mut self,
        author: usize,
        kind: EntryKind,
        round: usize,
        payload: Vec<u8>,
    ) -> &LedgerEntry {
        let hash = entry_hash(&self.head_hash(), author, kind, round, &payload);
        self.entries.push(LedgerEntry {
            author,
            kind,
            round,
            payload,
            hash,
        });
        self.entries.last().expect("just pushed")
    }

    /// Recomputes every hash from genesis; returns the index of the first
    /// entry whose stored hash does not match, or `None` when the chain is
    /// intact.
    pub fn first_broken_link(&self) -> Option<usize> {
        let mut prev = genesis_hash();
        for (idx, e) in self.entries.iter().enumerate() {
            let expect = entry_hash(&prev, e.author, e.kind, e.round, &e.payload);
            if expect != e.hash {
                return Some(idx);
            }
            prev = e.hash;
        }
        None
    }

    /// Writes the chain as one JSON object per line with hex-encoded hashes
    /// and base64-encoded payloads.
    pub fn dump_jsonl(&self, w: &mut impl Write) -> Result<()> {
        let mut prev = genesis_hash();
        for (index, e) in self.entries.iter().enumerate() {
            let record = DumpRecord {
                ledger: &self.name,
                index,
                author: e.author,
                kind: e.kind.label(),
                round: e.round,
                payload_b64: BASE64.encode(&e.payload),
                prev_hash_hex: hex::encode(prev),
                hash_hex: hex::encode(e.hash),
            };
            serde_json::to_writer(&mut *w, &record)?;
            writeln!(w)?;
            prev = e.hash;
        }
        Ok(())
    }

    /// Reads a chain dumped by [`Ledger::dump_jsonl`] and verifies it link
    /// by link while loading.
    pub fn load_jsonl(name: impl Into<String>, r: impl BufRead) -> Result<Ledger> {
        let mut ledger = Ledger::new(name);
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LoadRecord = serde_json::from_str(&line)?;
            let payload = BASE64
                .decode(rec.payload_b64.as_bytes())
                .map_err(|e| Error::Ledger(format!("line {}: bad payload: {e}", lineno + 1)))?;
            let kind = EntryKind::from_label(&rec.kind)?;
            let stored: [u8; 32] = hex::decode(&rec.hash_hex)
                .ok()
                .and_then(|v| v.try_into().ok())
                .ok_or_else(|| Error::Ledger(format!("line {}: bad hash", lineno + 1)))?;
            let expect = entry_hash(&ledger.head_hash(), rec.author, kind, rec.round, &payload);
            if expect != stored {
                return Err(Error::Ledger(format!(
                    "line {}: hash does not extend the chain",
                    lineno + 1
                )));
            }
            ledger.entries.push(LedgerEntry {
                author: rec.author,
                kind,
                round: rec.round,
                payload,
                hash: stored,
            });
        }
        Ok(ledger)
    }
}

#[derive(Serialize)]
struct DumpRecord<'a> {
    ledger: &'a str,
    index: usize,
    author: usize,
    kind: &'static str,
    round: usize,
    payload_b64: String,
    prev_hash_hex: String,
    hash_hex: String,
}

#[derive(Deserialize)]
struct LoadRecord {
    #[allow(dead_code)]
    ledger: String,
    #[allow(dead_code)]
    index: usize,
    author: usize,
    kind: String,
    round: usize,
    payload_b64: String,
    #[allow(dead_code)]
    prev_hash_hex: String,
    hash_hex: String,
}

/// Canonical payload encoding: each value as a little-endian `f64`.
pub fn encode_scalars<T: Scalar>(values: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for &v in values {
        out.extend_from_slice(&v.into_f64().to_le_bytes());
    }
    out
}

/// Inverse of [`encode_scalars`].
pub fn decode_scalars<T: Scalar>(bytes: &[u8]) -> Result<Vec<T>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Ledger(format!(
            "payload length {} is not a whole number of f64 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| T::from_f64(f64::from_le_bytes(c.try_into().expect("chunk of 8"))))
        .collect())
}
