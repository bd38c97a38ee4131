//! Radial feeder model: case parsing, topology validation, the global
//! variable space, the linearized branch-flow constraint matrix, and a
//! nonlinear power-flow oracle used to generate ground-truth states.

mod constraints;
mod network;
mod parse;
mod powerflow;
mod variables;

pub use constraints::{assemble_constraints, ConstraintMatrix, EquationFamily, RowTag};
pub use network::{Branch, Bus, GridNetwork};
pub use parse::parse_case;
pub use powerflow::{solve_power_flow, solve_power_flow_with, PowerFlowSolution, SweepOptions};
pub use variables::{build_variable_space, MeasuredPolicy, SystemVariableSpace, VarId};
