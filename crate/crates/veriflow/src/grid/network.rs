use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A bus (node) of the feeder, carrying its cleared injection schedule in
/// per-unit. Loads appear as negative scheduled injections.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus<T> {
    pub id: usize,
    pub is_substation: bool,
    pub scheduled_p: T,
    pub scheduled_q: T,
}

/// A distribution line, oriented away from the substation after network
/// construction (`from_bus` is always the end closer to the substation).
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    pub resistance: T,
    pub reactance: T,
    /// Marks a deliberate zero-impedance bookkeeping edge (used when a
    /// prosumer bus is split into sub-buses). Ordinary branches must have
    /// nonzero impedance.
    pub is_split_edge: bool,
}

impl<T: Scalar> Branch<T> {
    pub fn impedance_magnitude_sq(&self) -> T {
        self.resistance * self.resistance + self.reactance * self.reactance
    }
}

/// A validated radial network: a tree of branches rooted at the single
/// substation bus, with all branches oriented away from it.
///
/// Construction normalizes the representation: buses are sorted by id
/// (ids must form 1..=n), branches are flipped so `from_bus` is the parent
/// side, then sorted by `(from_bus, to_bus)` and re-numbered 1..=n-1 in that
/// order. All downstream index spaces build on this canonical ordering.
#[derive(Debug, Clone)]
pub struct GridNetwork<T> {
    buses: Vec<Bus<T>>,
    branches: Vec<Branch<T>>,
    base_mva: T,
    substation: usize,
    /// parent_branch[bus_rank] = branch array index of the branch feeding the
    /// bus; None for the substation.
    parent_branch: Vec<Option<usize>>,
    /// child_branches[bus_rank] = branch array indices leaving the bus.
    child_branches: Vec<Vec<usize>>,
}

impl<T: Scalar> GridNetwork<T> {
    pub fn new(mut buses: Vec<Bus<T>>, branches: Vec<Branch<T>>, base_mva: T) -> Result<Self> {
        if buses.is_empty() {
            return Err(Error::Topology("network has no buses".into()));
        }
        buses.sort_by_key(|b| b.id);
        for (rank, bus) in buses.iter().enumerate() {
            if bus.id != rank + 1 {
                return Err(Error::Topology(format!(
                    "bus ids must be contiguous 1..{}, found {}",
                    buses.len(),
                    bus.id
                )));
            }
        }
        let substations: Vec<usize> = buses
            .iter()
            .filter(|b| b.is_substation)
            .map(|b| b.id)
            .collect();
        let substation = match substations.as_slice() {
            [one] => *one,
            [] => return Err(Error::Topology("no substation bus".into())),
            many => {
                return Err(Error::Topology(format!(
                    "multiple substation buses: {:?}",
                    many
                )))
            }
        };
        let n = buses.len();
        if branches.len() != n - 1 {
            return Err(Error::Topology(format!(
                "radial network needs {} branches for {} buses, found {}",
                n - 1,
                n,
                branches.len()
            )));
        }
        for br in &branches {
            if br.from_bus == 0 || br.from_bus > n || br.to_bus == 0 || br.to_bus > n {
                return Err(Error::Topology(format!(
                    "branch {}-{} references an unknown bus",
                    br.from_bus, br.to_bus
                )));
            }
            if br.from_bus == br.to_bus {
                return Err(Error::Topology(format!("self-loop at bus {}", br.from_bus)));
            }
            if !br.is_split_edge && br.impedance_magnitude_sq() <= T::zero() {
                return Err(Error::Topology(format!(
                    "branch {}-{} has zero impedance but is not a split edge",
                    br.from_bus, br.to_bus
                )));
            }
        }

        // Orient away from the substation by BFS; any revisit means a cycle.
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + 1];
        for (idx, br) in branches.iter().enumerate() {
            adjacency[br.from_bus].push((br.to_bus, idx));
            adjacency[br.to_bus].push((br.from_bus, idx));
        }
        let mut parent_of: Vec<Option<usize>> = vec![None; n + 1];
        let mut visited = vec![false; n + 1];
        let mut oriented: Vec<Branch<T>> = Vec::with_capacity(branches.len());
        visited[substation] = true;
        let mut queue = std::collections::VecDeque::from([substation]);
        while let Some(bus) = queue.pop_front() {
            for &(other, idx) in &adjacency[bus] {
                if visited[other] {
                    continue;
                }
                visited[other] = true;
                parent_of[other] = Some(bus);
                let br = &branches[idx];
                oriented.push(Branch {
                    id: 0,
                    from_bus: bus,
                    to_bus: other,
                    resistance: br.resistance,
                    reactance: br.reactance,
                    is_split_edge: br.is_split_edge,
                });
                queue.push_back(other);
            }
        }
        if visited.iter().skip(1).any(|v| !v) {
            return Err(Error::Topology(
                "network is not connected (some buses unreachable from the substation)".into(),
            ));
        }
        if oriented.len() != branches.len() {
            return Err(Error::Topology("branch set contains a cycle".into()));
        }
        oriented.sort_by_key(|b| (b.from_bus, b.to_bus));
        for (idx, br) in oriented.iter_mut().enumerate() {
            br.id = idx + 1;
        }

        let mut parent_branch = vec![None; n];
        let mut child_branches = vec![Vec::new(); n];
        for (idx, br) in oriented.iter().enumerate() {
            parent_branch[br.to_bus - 1] = Some(idx);
            child_branches[br.from_bus - 1].push(idx);
        }

        Ok(GridNetwork {
            buses,
            branches: oriented,
            base_mva,
            substation,
            parent_branch,
            child_branches,
        })
    }

    pub fn buses(&self) -> &[Bus<T>] {
        &self.buses
    }

    /// Branches in canonical order: oriented away from the substation and
    /// sorted by `(from_bus, to_bus)`.
    pub fn branches(&self) -> &[Branch<T>] {
        &self.branches
    }

    pub fn base_mva(&self) -> T {
        self.base_mva
    }

    pub fn substation(&self) -> usize {
        self.substation
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn bus(&self, id: usize) -> &Bus<T> {
        &self.buses[id - 1]
    }

    /// Branch array index of the unique branch feeding `bus`, if any.
    pub fn parent_branch(&self, bus: usize) -> Option<usize> {
        self.parent_branch[bus - 1]
    }

    /// Branch array indices of all branches leaving `bus`.
    pub fn child_branches(&self, bus: usize) -> &[usize] {
        &self.child_branches[bus - 1]
    }

    /// Buses ordered by distance from the substation (substation first).
    /// Parent buses always precede their children.
    pub fn buses_by_depth(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.bus_count());
        let mut queue = std::collections::VecDeque::from([self.substation]);
        while let Some(bus) = queue.pop_front() {
            order.push(bus);
            for &idx in self.child_branches(bus) {
                queue.push_back(self.branches[idx].to_bus);
            }
        }
        order
    }

    /// Scheduled injections for every bus, in bus-id order. The substation's
    /// entries are zero (it has no schedule; it balances the feeder).
    pub fn scheduled_injections(&self) -> (Vec<T>, Vec<T>) {
        let p = self.buses.iter().map(|b| b.scheduled_p).collect();
        let q = self.buses.iter().map(|b| b.scheduled_q).collect();
        (p, q)
    }

    /// Overrides one bus's scheduled active injection; the substation's
    /// balance is implied by the others and cannot be set.
    pub fn set_scheduled_p(&mut self, bus: usize, value: T) -> Result<()> {
        if bus == self.substation {
            return Err(Error::Config(
                "the substation has no settable schedule".into(),
            ));
        }
        let slot = self
            .buses
            .iter_mut()
            .find(|b| b.id == bus)
            .ok_or_else(|| Error::Config(format!("unknown bus {bus}")))?;
        slot.scheduled_p = value;
        Ok(())
    }
}
