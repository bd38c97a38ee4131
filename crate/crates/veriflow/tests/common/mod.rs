use std::collections::BTreeMap;
use std::path::PathBuf;

use veriflow::grid::{
    build_variable_space, parse_case, GridNetwork, MeasuredPolicy, SystemVariableSpace,
};
use veriflow::partition::{
    assign_regions, build_region_views, parse_region_mapping, CommunicationGraph,
    RegionAssignment, RegionView,
};

pub fn case_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../cases")
        .join(name)
}

pub fn feeder() -> GridNetwork<f64> {
    let text = std::fs::read_to_string(case_path("feeder141.m")).unwrap();
    parse_case(&text).unwrap()
}

pub fn feeder_mapping() -> BTreeMap<usize, usize> {
    let text = std::fs::read_to_string(case_path("feeder141.regions")).unwrap();
    parse_region_mapping(&text).unwrap()
}

#[allow(dead_code)]
pub fn feeder_setup() -> (
    GridNetwork<f64>,
    SystemVariableSpace,
    RegionAssignment,
    Vec<RegionView<f64>>,
    CommunicationGraph,
) {
    let net = feeder();
    let space = build_variable_space(&net, MeasuredPolicy::All).unwrap();
    let assignment = assign_regions(&net, &feeder_mapping()).unwrap();
    let (views, graph) = build_region_views(&net, &space, &assignment).unwrap();
    (net, space, assignment, views, graph)
}
