use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ledger::chain::{EntryKind, Ledger};

/// The full ledger layout for one verification run: one local chain per
/// region, one pairwise chain per communication edge, and one global chain.
///
/// Each chain only accepts what its role allows:
/// - a local chain holds a region's own measurements and state snapshots;
/// - a pairwise chain holds the boundary slices the two endpoint regions
///   exchanged, so either side can audit what the other claimed to send;
/// - the global chain holds only the aggregate detection products
///   (disagreement scores, trust scores, verdicts), never raw state.
#[derive(Debug, Clone)]
pub struct LedgerSet {
    locals: BTreeMap<usize, Ledger>,
    pairwise: BTreeMap<(usize, usize), Ledger>,
    global: Ledger,
}

fn edge_key(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

impl LedgerSet {
    pub fn new(regions: &[usize], edges: &[(usize, usize)]) -> Result<Self> {
        let mut locals = BTreeMap::new();
        for &r in regions {
            if locals.insert(r, Ledger::new(format!("LL-{r}"))).is_some() {
                return Err(Error::Ledger(format!("duplicate region {r}")));
            }
        }
        let mut pairwise = BTreeMap::new();
        for &(i, j) in edges {
            if i == j {
                return Err(Error::Ledger(format!("self edge on region {i}")));
            }
            if !locals.contains_key(&i) || !locals.contains_key(&j) {
                return Err(Error::Ledger(format!("edge ({i}, {j}) off the region set")));
            }
            let key = edge_key(i, j);
            pairwise
                .entry(key)
                .or_insert_with(|| Ledger::new(format!("GL-{}-{}", key.0, key.1)));
        }
        Ok(LedgerSet {
            locals,
            pairwise,
            global: Ledger::new("GL"),
        })
    }

    pub fn region_ids(&self) -> Vec<usize> {
        self.locals.keys().copied().collect()
    }

    pub fn local(&self, region: usize) -> Result<&Ledger> {
        self.locals
            .get(&region)
            .ok_or_else(|| Error::Ledger(format!("no local chain for region {region}")))
    }

    pub fn pairwise(&self, i: usize, j: usize) -> Result<&Ledger> {
        self.pairwise
            .get(&edge_key(i, j))
            .ok_or_else(|| Error::Ledger(format!("no pairwise chain for ({i}, {j})")))
    }

    pub fn global(&self) -> &Ledger {
        &self.global
    }

    /// Appends to a region's own chain. Only raw per-region data is allowed
    /// here, and only the region itself may write it.
    pub fn record_local(
        &mut self,
        region: usize,
        kind: EntryKind,
        round: usize,
        payload: Vec<u8>,
    ) -> Result<()> {
        match kind {
            EntryKind::Measurements | EntryKind::AdmmState => {}
            other => {
                return Err(Error::Ledger(format!(
                    "kind `{}` does not belong in a local chain",
                    other.label()
                )))
            }
        }
        let ledger = self
            .locals
            .get_mut(&region)
            .ok_or_else(|| Error::Ledger(format!("no local chain for region {region}")))?;
        ledger.append(region, kind, round, payload);
        Ok(())
    }

    /// Appends one exchanged boundary slice to the chain both endpoints
    /// share; `src` is the author, `dst` the receiver.
    pub fn record_shared(
        &mut self,
        src: usize,
        dst: usize,
        round: usize,
        payload: Vec<u8>,
    ) -> Result<()> {
        let ledger = self
            .pairwise
            .get_mut(&edge_key(src, dst))
            .ok_or_else(|| Error::Ledger(format!("no pairwise chain for ({src}, {dst})")))?;
        ledger.append(src, EntryKind::SharedSlice, round, payload);
        Ok(())
    }

    /// Appends a detection product to the global chain. Raw state and
    /// measurements are rejected so the global chain never leaks regional
    /// data.
    pub fn record_global(
        &mut self,
        author: usize,
        kind: EntryKind,
        round: usize,
        payload: Vec<u8>,
    ) -> Result<()> {
        match kind {
            EntryKind::Disagreement | EntryKind::TrustScore | EntryKind::Verdict => {}
            other => {
                return Err(Error::Ledger(format!(
                    "kind `{}` does not belong in the global chain",
                    other.label()
                )))
            }
        }
        if !self.locals.contains_key(&author) {
            return Err(Error::Ledger(format!("unknown author {author}")));
        }
        self.global.append(author, kind, round, payload);
        Ok(())
    }

    /// Checks every chain; returns the broken ones as (chain name, index of
    /// the first bad entry). Empty means every chain is intact.
    pub fn audit(&self) -> Vec<(String, usize)> {
        let mut broken = Vec::new();
        for chain in self.chains() {
            if let Some(idx) = chain.first_broken_link() {
                broken.push((chain.name().to_string(), idx));
            }
        }
        broken
    }

    fn chains(&self) -> impl Iterator<Item = &Ledger> {
        self.locals
            .values()
            .chain(self.pairwise.values())
            .chain(std::iter::once(&self.global))
    }

    /// Writes every chain as `<name>.jsonl` under `dir`, creating it if
    /// needed; returns the written paths.
    pub fn dump_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for chain in self.chains() {
            let path = dir.join(format!("{}.jsonl", chain.name()));
            let mut file = fs::File::create(&path)?;
            chain.dump_jsonl(&mut file)?;
            paths.push(path);
        }
        Ok(paths)
    }

    /// Total entries over every chain.
    pub fn total_entries(&self) -> usize {
        self.chains().map(Ledger::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::chain::encode_scalars;

    fn small_set() -> LedgerSet {
        LedgerSet::new(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn local_chain_rejects_detection_products() {
        let mut set = small_set();
        assert!(set
            .record_local(1, EntryKind::Measurements, 0, encode_scalars(&[1.0f64]))
            .is_ok());
        assert!(set
            .record_local(1, EntryKind::TrustScore, 0, encode_scalars(&[1.0f64]))
            .is_err());
        assert!(set
            .record_local(1, EntryKind::Verdict, 0, vec![])
            .is_err());
    }

    #[test]
    fn global_chain_rejects_raw_state() {
        let mut set = small_set();
        assert!(set
            .record_global(1, EntryKind::TrustScore, 2, encode_scalars(&[0.3f64]))
            .is_ok());
        assert!(set
            .record_global(1, EntryKind::AdmmState, 2, encode_scalars(&[0.3f64]))
            .is_err());
        assert!(set
            .record_global(1, EntryKind::Measurements, 2, vec![])
            .is_err());
    }

    #[test]
    fn shared_slices_need_an_edge() {
        let mut set = small_set();
        assert!(set.record_shared(1, 2, 1, encode_scalars(&[0.1f64])).is_ok());
        assert!(set.record_shared(2, 1, 1, encode_scalars(&[0.2f64])).is_ok());
        assert!(set.record_shared(1, 3, 1, encode_scalars(&[0.3f64])).is_err());
        assert_eq!(set.pairwise(1, 2).unwrap().len(), 2);
        assert_eq!(set.pairwise(2, 1).unwrap().len(), 2);
    }

    #[test]
    fn audit_reports_every_intact_chain_silently() {
        let mut set = small_set();
        set.record_local(2, EntryKind::AdmmState, 1, encode_scalars(&[0.5f64]))
            .unwrap();
        set.record_global(3, EntryKind::Disagreement, 1, encode_scalars(&[0.1f64]))
            .unwrap();
        assert!(set.audit().is_empty());
        assert_eq!(set.total_entries(), 2);
    }

    #[test]
    fn dump_dir_writes_one_file_per_chain() {
        let dir = tempfile::tempdir().unwrap();
        let mut set = small_set();
        set.record_shared(1, 2, 1, encode_scalars(&[0.1f64])).unwrap();
        let paths = set.dump_dir(dir.path()).unwrap();
        assert_eq!(paths.len(), 6);
        let names: Vec<String> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"LL-1.jsonl".to_string()));
        assert!(names.contains(&"GL-1-2.jsonl".to_string()));
        assert!(names.contains(&"GL.jsonl".to_string()));
    }
}
