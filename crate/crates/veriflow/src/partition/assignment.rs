use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::grid::GridNetwork;
use crate::scalar::Scalar;

/// Validated bus-to-region mapping with contiguous region ids `1..=N`.
#[derive(Debug, Clone)]
pub struct RegionAssignment {
    region_count: usize,
    region_of: Vec<usize>,
}

impl RegionAssignment {
    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn region_of(&self, bus: usize) -> usize {
        self.region_of[bus - 1]
    }

    pub fn buses_in(&self, region: usize) -> Vec<usize> {
        (1..=self.region_of.len())
            .filter(|&b| self.region_of[b - 1] == region)
            .collect()
    }

    pub fn region_ids(&self) -> impl Iterator<Item = usize> {
        1..=self.region_count
    }
}

/// Parses a line-oriented `bus_id region_id` mapping; `#` starts a comment.
pub fn parse_region_mapping(text: &str) -> Result<BTreeMap<usize, usize>> {
    let mut mapping = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bus: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(lineno + 1, "expected bus id"))?;
        let region: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(lineno + 1, "expected region id"))?;
        if parts.next().is_some() {
            return Err(Error::parse(lineno + 1, "trailing tokens after pair"));
        }
        if mapping.insert(bus, region).is_some() {
            return Err(Error::parse(lineno + 1, format!("bus {bus} mapped twice")));
        }
    }
    Ok(mapping)
}

pub fn assign_regions<T: Scalar>(
    net: &GridNetwork<T>,
    mapping: &BTreeMap<usize, usize>,
) -> Result<RegionAssignment> {
    let n_bus = net.bus_count();
    let mut region_of = vec![0usize; n_bus];
    for bus in 1..=n_bus {
        let region = *mapping.get(&bus).ok_or_else(|| {
            Error::Topology(format!("region mapping does not cover bus {bus}"))
        })?;
        if region == 0 {
            return Err(Error::Topology(format!(
                "bus {bus} mapped to region 0; region ids start at 1"
            )));
        }
        region_of[bus - 1] = region;
    }
    for &bus in mapping.keys() {
        if bus == 0 || bus > n_bus {
            return Err(Error::Topology(format!(
                "region mapping names unknown bus {bus}"
            )));
        }
    }
    let region_count = *region_of.iter().max().expect("network has buses");
    let mut seen = vec![false; region_count];
    for &r in &region_of {
        seen[r - 1] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Topology(format!(
            "region {} is empty; region ids must be contiguous 1..=N",
            missing + 1
        )));
    }
    Ok(RegionAssignment {
        region_count,
        region_of,
    })
}

/// Undirected simple graph over surviving region ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunicationGraph {
    adjacency: BTreeMap<usize, BTreeSet<usize>>,
}

impl CommunicationGraph {
    pub fn new(nodes: impl IntoIterator<Item = usize>) -> Self {
        CommunicationGraph {
            adjacency: nodes.into_iter().map(|n| (n, BTreeSet::new())).collect(),
        }
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::Topology(format!("self-loop on region {i}")));
        }
        if !self.adjacency.contains_key(&i) || !self.adjacency.contains_key(&j) {
            return Err(Error::Topology(format!(
                "edge ({i},{j}) references an unknown region"
            )));
        }
        self.adjacency.get_mut(&i).unwrap().insert(j);
        self.adjacency.get_mut(&j).unwrap().insert(i);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn contains(&self, region: usize) -> bool {
        self.adjacency.contains_key(&region)
    }

    pub fn neighbors(&self, region: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .get(&region)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    pub fn degree(&self, region: usize) -> usize {
        self.adjacency.get(&region).map_or(0, |s| s.len())
    }

    /// Unordered edges as (low, high) pairs in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (&i, nbrs) in &self.adjacency {
            for &j in nbrs {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Removes a node and its incident edges.
    pub fn remove_node(&mut self, region: usize) -> Result<()> {
        if self.adjacency.remove(&region).is_none() {
            return Err(Error::Topology(format!(
                "region {region} is not in the communication graph"
            )));
        }
        for nbrs in self.adjacency.values_mut() {
            nbrs.remove(&region);
        }
        Ok(())
    }
}

/// Connected components as sorted node lists, ordered by smallest member.
pub fn connected_components(graph: &CommunicationGraph) -> Vec<Vec<usize>> {
    let mut seen = BTreeSet::new();
    let mut components = Vec::new();
    for start in graph.nodes() {
        if seen.contains(&start) {
            continue;
        }
        let mut stack = vec![start];
        let mut comp = Vec::new();
        seen.insert(start);
        while let Some(u) = stack.pop() {
            comp.push(u);
            for w in graph.neighbors(u) {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// True when deleting the region increases the component count.
pub fn is_cut_vertex(graph: &CommunicationGraph, region: usize) -> Result<bool> {
    if !graph.contains(region) {
        return Err(Error::Topology(format!(
            "region {region} is not in the communication graph"
        )));
    }
    let before = connected_components(graph).len();
    let mut trimmed = graph.clone();
    trimmed.remove_node(region)?;
    Ok(connected_components(&trimmed).len() > before)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_case;

    const THREE_BUS: &str = "\
[buses]
1 1 0 0
2 0 -0.1 -0.03
3 0 -0.05 -0.02
[branches]
1 1 2 0.01 0.02
2 2 3 0.015 0.01
";

    fn net() -> GridNetwork<f64> {
        parse_case(THREE_BUS).unwrap()
    }

    #[test]
    fn mapping_parses_with_comments() {
        let text = "# header\n1 1\n2 1  # trailing\n\n3 2\n";
        let mapping = parse_region_mapping(text).unwrap();
        assert_eq!(mapping.len(), 3);
        assert_eq!(mapping[&3], 2);
        assert!(parse_region_mapping("1 1\n1 2\n").is_err());
        assert!(parse_region_mapping("1\n").is_err());
    }

    #[test]
    fn assignment_validates_coverage_and_contiguity() {
        let full: BTreeMap<usize, usize> = [(1, 1), (2, 1), (3, 2)].into();
        let a = assign_regions(&net(), &full).unwrap();
        assert_eq!(a.region_count(), 2);
        assert_eq!(a.buses_in(1), vec![1, 2]);
        assert_eq!(a.region_of(3), 2);

        let missing: BTreeMap<usize, usize> = [(1, 1), (3, 2)].into();
        assert!(assign_regions(&net(), &missing).is_err());

        let gap: BTreeMap<usize, usize> = [(1, 1), (2, 1), (3, 3)].into();
        assert!(assign_regions(&net(), &gap).is_err());

        let single: BTreeMap<usize, usize> = [(1, 1), (2, 1), (3, 1)].into();
        assert_eq!(assign_regions(&net(), &single).unwrap().region_count(), 1);
    }

    #[test]
    fn path_graph_cut_vertex() {
        let mut g = CommunicationGraph::new([1, 2, 3]);
        g.add_edge(1, 2).unwrap();
        g.add_edge(2, 3).unwrap();
        assert!(is_cut_vertex(&g, 2).unwrap());
        assert!(!is_cut_vertex(&g, 1).unwrap());
        assert!(is_cut_vertex(&g, 9).is_err());
        assert_eq!(connected_components(&g), vec![vec![1, 2, 3]]);
        g.remove_node(2).unwrap();
        assert_eq!(connected_components(&g), vec![vec![1], vec![3]]);
    }

    #[test]
    fn graph_rejects_self_loops_and_unknown_nodes() {
        let mut g = CommunicationGraph::new([1, 2]);
        assert!(g.add_edge(1, 1).is_err());
        assert!(g.add_edge(1, 5).is_err());
        g.add_edge(2, 1).unwrap();
        assert_eq!(g.edges(), vec![(1, 2)]);
        assert_eq!(g.degree(1), 1);
    }
}
