//! Region assignment, the inter-region communication graph, and the
//! per-region operator views consumed by the consensus solver.
//!
//! A region owns a set of buses. Its view replicates every branch touching
//! those buses and the bus variables at the far end of each tie-line, so the
//! boundary constraint rows are fully supported locally. Two regions are
//! communication neighbours exactly when their variable lists overlap.

mod assignment;
mod view;

pub use assignment::{
    assign_regions, connected_components, is_cut_vertex, parse_region_mapping,
    CommunicationGraph, RegionAssignment,
};
pub use view::{build_region_views, remove_region, view_of, RegionView};
