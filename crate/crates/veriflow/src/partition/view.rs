use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{assemble_constraints, GridNetwork, SystemVariableSpace};
use crate::linalg::CsrMatrix;
use crate::partition::assignment::{connected_components, CommunicationGraph, RegionAssignment};
use crate::scalar::Scalar;

/// One aggregator's operators: local variable list, measurement and schedule
/// selectors, the locally supported constraint rows, per-neighbour shared
/// index lists, and the sharing-degree diagonals.
#[derive(Debug, Clone)]
pub struct RegionView<T> {
    id: usize,
    own_buses: Vec<usize>,
    local: Vec<usize>,
    measured_local: Vec<usize>,
    sched_buses: Vec<usize>,
    sched_local: Vec<usize>,
    schedule: Vec<T>,
    h_rows: Vec<usize>,
    h_local: CsrMatrix<T>,
    shared: BTreeMap<usize, Vec<usize>>,
    deg: Vec<T>,
    dbar: Vec<T>,
}

impl<T: Scalar> RegionView<T> {
    pub fn id(&self) -> usize {
        self.id
    }

    /// Local dimension m_i.
    pub fn dimension(&self) -> usize {
        self.local.len()
    }

    pub fn own_buses(&self) -> &[usize] {
        &self.own_buses
    }

    /// Global indices in local order (sorted ascending).
    pub fn local_variables(&self) -> &[usize] {
        &self.local
    }

    pub fn global_index(&self, local: usize) -> usize {
        self.local[local]
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.local.binary_search(&global).ok()
    }

    /// Local indices of measured variables (rows of S_a).
    pub fn measured_local(&self) -> &[usize] {
        &self.measured_local
    }

    /// Buses whose active-power schedule this region enforces (rows of S_p).
    pub fn scheduled_buses(&self) -> &[usize] {
        &self.sched_buses
    }

    pub fn scheduled_local(&self) -> &[usize] {
        &self.sched_local
    }

    /// Scheduled active-power values aligned with `scheduled_buses`.
    pub fn schedule(&self) -> &[T] {
        &self.schedule
    }

    /// Locally supported constraint block H⁽ⁱ⁾ (columns in local order).
    pub fn constraints(&self) -> &CsrMatrix<T> {
        &self.h_local
    }

    /// Global row ids of the rows kept in H⁽ⁱ⁾.
    pub fn constraint_row_ids(&self) -> &[usize] {
        &self.h_rows
    }

    pub fn neighbors(&self) -> impl Iterator<Item = usize> + '_ {
        self.shared.keys().copied()
    }

    pub fn is_neighbor(&self, j: usize) -> bool {
        self.shared.contains_key(&j)
    }

    /// Local indices of variables shared with neighbour `j`, ascending in
    /// global index; position k pairs with position k on j's side.
    pub fn shared_with(&self, j: usize) -> Result<&[usize]> {
        self.shared
            .get(&j)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Topology(format!("region {} has no neighbor {j}", self.id)))
    }

    pub fn shared_globals(&self, j: usize) -> Result<Vec<usize>> {
        Ok(self.shared_with(j)?.iter().map(|&k| self.local[k]).collect())
    }

    /// Sharing-degree diagonal D⁽ⁱ⁾.
    pub fn degree(&self) -> &[T] {
        &self.deg
    }

    /// Pseudo-inverse diagonal D̄⁽ⁱ⁾.
    pub fn degree_pinv(&self) -> &[T] {
        &self.dbar
    }

    /// Restricts a global vector to the local view (S⁽ⁱ⁾ x).
    pub fn restrict(&self, global_x: &[T]) -> Result<Vec<T>> {
        let need = self.local.last().map_or(0, |&g| g + 1);
        if global_x.len() < need {
            return Err(Error::Dimension {
                context: "global vector for region restriction",
                expected: need,
                got: global_x.len(),
            });
        }
        Ok(self.local.iter().map(|&g| global_x[g]).collect())
    }

    /// The outgoing message S_ij x⁽ⁱ⁾ for neighbour `j`.
    pub fn extract_shared(&self, local_x: &[T], j: usize) -> Result<Vec<T>> {
        if local_x.len() != self.dimension() {
            return Err(Error::Dimension {
                context: "local state for shared extraction",
                expected: self.dimension(),
                got: local_x.len(),
            });
        }
        Ok(self.shared_with(j)?.iter().map(|&k| local_x[k]).collect())
    }
}

pub fn build_region_views<T: Scalar>(
    net: &GridNetwork<T>,
    space: &SystemVariableSpace,
    assignment: &RegionAssignment,
) -> Result<(Vec<RegionView<T>>, CommunicationGraph)> {
    let n_regions = assignment.region_count();
    let mut local_sets: Vec<Vec<usize>> = vec![Vec::new(); n_regions];
    for bus in 1..=net.bus_count() {
        let r = assignment.region_of(bus);
        local_sets[r - 1].extend([
            space.injection_p(bus),
            space.injection_q(bus),
            space.voltage_sq(bus),
        ]);
    }
    for (l, br) in net.branches().iter().enumerate() {
        let rf = assignment.region_of(br.from_bus);
        let rt = assignment.region_of(br.to_bus);
        let branch_vars = [
            space.flow_p(l),
            space.flow_q(l),
            space.current_sq(l),
            space.aux(l),
        ];
        local_sets[rf - 1].extend(branch_vars);
        if rt != rf {
            local_sets[rt - 1].extend(branch_vars);
            local_sets[rf - 1].extend([
                space.injection_p(br.to_bus),
                space.injection_q(br.to_bus),
                space.voltage_sq(br.to_bus),
            ]);
            local_sets[rt - 1].extend([
                space.injection_p(br.from_bus),
                space.injection_q(br.from_bus),
                space.voltage_sq(br.from_bus),
            ]);
        }
    }
    for set in &mut local_sets {
        set.sort_unstable();
        set.dedup();
    }

    let mut holders = vec![0usize; space.dimension()];
    for set in &local_sets {
        for &g in set {
            holders[g] += 1;
        }
    }

    let constraints = assemble_constraints(net, space)?;
    let (sched_p, _) = net.scheduled_injections();
    let substation = net.substation();

    let mut graph = CommunicationGraph::new(1..=n_regions);
    let mut shared_maps: Vec<BTreeMap<usize, Vec<usize>>> =
        vec![BTreeMap::new(); n_regions];
    for i in 1..=n_regions {
        for j in (i + 1)..=n_regions {
            let a = &local_sets[i - 1];
            let b = &local_sets[j - 1];
            let common: Vec<usize> = a
                .iter()
                .copied()
                .filter(|g| b.binary_search(g).is_ok())
                .collect();
            if common.is_empty() {
                continue;
            }
            graph.add_edge(i, j)?;
            let to_local = |set: &[usize], globals: &[usize]| -> Vec<usize> {
                globals
                    .iter()
                    .map(|g| set.binary_search(g).expect("shared var is local"))
                    .collect()
            };
            shared_maps[i - 1].insert(j, to_local(a, &common));
            shared_maps[j - 1].insert(i, to_local(b, &common));
        }
    }

    let mut views = Vec::with_capacity(n_regions);
    let mut covered = vec![false; constraints.rows()];
    for i in 1..=n_regions {
        let local = std::mem::take(&mut local_sets[i - 1]);
        let m_i = local.len();

        let mut h_rows = Vec::new();
        let mut triplets = Vec::new();
        for row in 0..constraints.rows() {
            let entries: Vec<(usize, T)> = constraints.matrix().row(row).collect();
            if entries
                .iter()
                .all(|(col, _)| local.binary_search(col).is_ok())
            {
                let r_local = h_rows.len();
                for (col, v) in entries {
                    let c_local = local.binary_search(&col).expect("checked support");
                    triplets.push((r_local, c_local, v));
                }
                h_rows.push(row);
                covered[row] = true;
            }
        }
        let h_local = CsrMatrix::from_triplets(h_rows.len(), m_i, &triplets);

        let measured_local: Vec<usize> = local
            .iter()
            .enumerate()
            .filter(|&(_, &g)| space.is_measured(g))
            .map(|(k, _)| k)
            .collect();

        let own_buses = assignment.buses_in(i);
        let sched_buses: Vec<usize> = own_buses
            .iter()
            .copied()
            .filter(|&b| b != substation)
            .collect();
        let sched_local: Vec<usize> = sched_buses
            .iter()
            .map(|&b| {
                local
                    .binary_search(&space.injection_p(b))
                    .expect("own bus injection is local")
            })
            .collect();
        let schedule: Vec<T> = sched_buses.iter().map(|&b| sched_p[b - 1]).collect();

        let deg: Vec<T> = local
            .iter()
            .map(|&g| T::from_f64((holders[g] - 1) as f64))
            .collect();
        let dbar: Vec<T> = deg
            .iter()
            .map(|&d| if d > T::zero() { T::one() / d } else { T::zero() })
            .collect();

        views.push(RegionView {
            id: i,
            own_buses,
            local,
            measured_local,
            sched_buses,
            sched_local,
            schedule,
            h_rows,
            h_local,
            shared: std::mem::take(&mut shared_maps[i - 1]),
            deg,
            dbar,
        });
    }

    if let Some(row) = covered.iter().position(|&c| !c) {
        return Err(Error::Topology(format!(
            "constraint row {row} is not supported by any region"
        )));
    }
    Ok((views, graph))
}

/// Finds the view with the given region id.
pub fn view_of<T: Scalar>(views: &[RegionView<T>], id: usize) -> Result<&RegionView<T>> {
    views
        .iter()
        .find(|v| v.id == id)
        .ok_or_else(|| Error::Topology(format!("no view for region {id}")))
}

/// Deletes a region: surviving views lose their shared lists with it and the
/// sharing degrees of those variables drop (to zero when it was the only
/// co-holder). Returns the surviving views, the trimmed graph, and its
/// connected components.
pub fn remove_region<T: Scalar>(
    views: &[RegionView<T>],
    graph: &CommunicationGraph,
    region: usize,
) -> Result<(Vec<RegionView<T>>, CommunicationGraph, Vec<Vec<usize>>)> {
    view_of(views, region)?;
    if views.len() == 1 {
        return Err(Error::Topology(
            "cannot remove the last remaining region".into(),
        ));
    }
    let mut survivors = Vec::with_capacity(views.len() - 1);
    for v in views {
        if v.id == region {
            continue;
        }
        let mut v = v.clone();
        if let Some(shared) = v.shared.remove(&region) {
            for k in shared {
                v.deg[k] = v.deg[k] - T::one();
                v.dbar[k] = if v.deg[k] > T::zero() {
                    T::one() / v.deg[k]
                } else {
                    T::zero()
                };
            }
        }
        survivors.push(v);
    }
    let mut trimmed = graph.clone();
    trimmed.remove_node(region)?;
    let components = connected_components(&trimmed);
    Ok((survivors, trimmed, components))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_variable_space, parse_case, MeasuredPolicy};

    const TWO_BUS: &str = "\
[buses]
1 1 0 0
2 0 -0.1 0
[branches]
1 1 2 0.01 0.02
";

    fn two_bus_views(
        mapping: &[(usize, usize)],
    ) -> (Vec<RegionView<f64>>, CommunicationGraph) {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        let space = build_variable_space(&net, MeasuredPolicy::All).unwrap();
        let assignment = assign_regions(&net, &mapping.iter().copied().collect()).unwrap();
        build_region_views(&net, &space, &assignment).unwrap()
    }

    use crate::partition::assignment::assign_regions;

    #[test]
    fn split_two_bus_shares_everything() {
        let (views, graph) = two_bus_views(&[(1, 1), (2, 2)]);
        assert_eq!(views.len(), 2);
        for v in &views {
            assert_eq!(v.dimension(), 10);
            assert_eq!(v.constraint_row_ids(), &[0, 1, 2, 3]);
            assert_eq!(v.shared_with(3 - v.id()).unwrap().len(), 10);
            assert!(v.degree().iter().all(|&d| d == 1.0));
        }
        assert_eq!(graph.edges(), vec![(1, 2)]);
        assert_eq!(
            views[0].shared_globals(2).unwrap(),
            views[1].shared_globals(1).unwrap()
        );
        assert_eq!(views[0].scheduled_buses(), &[] as &[usize]);
        assert_eq!(views[1].scheduled_buses(), &[2]);
        assert_eq!(views[1].schedule(), &[-0.1]);
    }

    #[test]
    fn single_region_has_no_neighbors_and_full_h() {
        let (views, graph) = two_bus_views(&[(1, 1), (2, 1)]);
        assert_eq!(views.len(), 1);
        let v = &views[0];
        assert_eq!(v.dimension(), 10);
        assert_eq!(v.constraints().rows(), 4);
        assert!(v.degree().iter().all(|&d| d == 0.0));
        assert!(v.degree_pinv().iter().all(|&d| d == 0.0));
        assert_eq!(graph.edges(), vec![]);
        assert!(v.shared_with(2).is_err());
    }

    #[test]
    fn restriction_and_extraction_round_trip() {
        let (views, _) = two_bus_views(&[(1, 1), (2, 2)]);
        let global: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let local = views[0].restrict(&global).unwrap();
        assert_eq!(local, global);
        let msg = views[0].extract_shared(&local, 2).unwrap();
        assert_eq!(msg, global);
        assert!(views[0].extract_shared(&local[..5], 2).is_err());
    }

    #[test]
    fn removal_zeroes_degrees_and_errors_on_last() {
        let (views, graph) = two_bus_views(&[(1, 1), (2, 2)]);
        let (survivors, trimmed, comps) = remove_region(&views, &graph, 2).unwrap();
        assert_eq!(survivors.len(), 1);
        assert_eq!(survivors[0].id(), 1);
        assert!(survivors[0].degree().iter().all(|&d| d == 0.0));
        assert!(survivors[0].degree_pinv().iter().all(|&d| d == 0.0));
        assert_eq!(trimmed.node_count(), 1);
        assert_eq!(comps, vec![vec![1]]);
        assert!(remove_region(&survivors, &trimmed, 1).is_err());
        assert!(remove_region(&survivors, &trimmed, 9).is_err());
    }

    #[test]
    fn measured_subset_follows_policy() {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        let space = build_variable_space(&net, MeasuredPolicy::InjectionsOnly).unwrap();
        let mapping = [(1, 1), (2, 2)].iter().copied().collect();
        let assignment = assign_regions(&net, &mapping).unwrap();
        let (views, _) = build_region_views(&net, &space, &assignment).unwrap();
        for v in &views {
            assert_eq!(v.measured_local().len(), 6);
            for &k in v.measured_local() {
                assert!(v.global_index(k) < 6);
            }
        }
    }
}
