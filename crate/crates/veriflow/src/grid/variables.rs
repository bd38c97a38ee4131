use crate::error::{Error, Result};
use crate::grid::network::GridNetwork;
use crate::grid::powerflow::PowerFlowSolution;
use crate::scalar::Scalar;

/// Which variables carry sensor measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeasuredPolicy {
    /// Every system variable is measured.
    All,
    /// All per-bus variables (injections and squared voltages) are measured;
    /// branch variables are not.
    InjectionsOnly,
    /// Exactly the listed global indices are measured.
    Explicit(Vec<usize>),
}

/// Identity of one global variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarId {
    /// Real power injection at a bus.
    InjectionP(usize),
    /// Reactive power injection at a bus.
    InjectionQ(usize),
    /// Squared voltage magnitude at a bus.
    VoltageSq(usize),
    /// Real power flow on a branch (branch array index).
    FlowP(usize),
    /// Reactive power flow on a branch.
    FlowQ(usize),
    /// Squared current magnitude on a branch.
    CurrentSq(usize),
    /// Relaxation auxiliary tied to the branch's sending-end squared voltage.
    Aux(usize),
}

/// Deterministic global indexing of all system variables: buses in id order
/// contribute (p, q, v²) triples, then branches in canonical order contribute
/// (P, Q, c², x′) quadruples.
#[derive(Debug, Clone)]
pub struct SystemVariableSpace {
    n_bus: usize,
    branch_ends: Vec<(usize, usize)>,
    measured: Vec<bool>,
}

pub fn build_variable_space<T: Scalar>(
    net: &GridNetwork<T>,
    measured: MeasuredPolicy,
) -> Result<SystemVariableSpace> {
    let n_bus = net.bus_count();
    let branch_ends: Vec<(usize, usize)> = net
        .branches()
        .iter()
        .map(|b| (b.from_bus, b.to_bus))
        .collect();
    let m = 3 * n_bus + 4 * branch_ends.len();
    let mask = match measured {
        MeasuredPolicy::All => vec![true; m],
        MeasuredPolicy::InjectionsOnly => {
            let mut mask = vec![false; m];
            mask[..3 * n_bus].fill(true);
            mask
        }
        MeasuredPolicy::Explicit(indices) => {
            let mut mask = vec![false; m];
            for idx in indices {
                *mask.get_mut(idx).ok_or(Error::Dimension {
                    context: "explicit measured index",
                    expected: m,
                    got: idx,
                })? = true;
            }
            mask
        }
    };
    Ok(SystemVariableSpace {
        n_bus,
        branch_ends,
        measured: mask,
    })
}

impl SystemVariableSpace {
    /// Total variable count m = 3|buses| + 4|branches|.
    pub fn dimension(&self) -> usize {
        self.measured.len()
    }

    pub fn bus_count(&self) -> usize {
        self.n_bus
    }

    pub fn branch_count(&self) -> usize {
        self.branch_ends.len()
    }

    pub fn injection_p(&self, bus: usize) -> usize {
        debug_assert!(bus >= 1 && bus <= self.n_bus);
        3 * (bus - 1)
    }

    pub fn injection_q(&self, bus: usize) -> usize {
        3 * (bus - 1) + 1
    }

    pub fn voltage_sq(&self, bus: usize) -> usize {
        3 * (bus - 1) + 2
    }

    pub fn flow_p(&self, branch: usize) -> usize {
        3 * self.n_bus + 4 * branch
    }

    pub fn flow_q(&self, branch: usize) -> usize {
        3 * self.n_bus + 4 * branch + 1
    }

    pub fn current_sq(&self, branch: usize) -> usize {
        3 * self.n_bus + 4 * branch + 2
    }

    pub fn aux(&self, branch: usize) -> usize {
        3 * self.n_bus + 4 * branch + 3
    }

    pub fn describe(&self, index: usize) -> VarId {
        if index < 3 * self.n_bus {
            let bus = index / 3 + 1;
            match index % 3 {
                0 => VarId::InjectionP(bus),
                1 => VarId::InjectionQ(bus),
                _ => VarId::VoltageSq(bus),
            }
        } else {
            let rest = index - 3 * self.n_bus;
            let branch = rest / 4;
            match rest % 4 {
                0 => VarId::FlowP(branch),
                1 => VarId::FlowQ(branch),
                2 => VarId::CurrentSq(branch),
                _ => VarId::Aux(branch),
            }
        }
    }

    /// Bus id owning the variable, if it is a per-bus variable.
    pub fn bus_of(&self, index: usize) -> Option<usize> {
        (index < 3 * self.n_bus).then(|| index / 3 + 1)
    }

    /// Branch array index owning the variable, if it is a per-branch variable.
    pub fn branch_of(&self, index: usize) -> Option<usize> {
        (index >= 3 * self.n_bus).then(|| (index - 3 * self.n_bus) / 4)
    }

    /// Short display name, e.g. `p[42]` or `P[42-43]`.
    pub fn var_name(&self, index: usize) -> String {
        match self.describe(index) {
            VarId::InjectionP(b) => format!("p[{b}]"),
            VarId::InjectionQ(b) => format!("q[{b}]"),
            VarId::VoltageSq(b) => format!("vsq[{b}]"),
            VarId::FlowP(l) => {
                let (f, t) = self.branch_ends[l];
                format!("P[{f}-{t}]")
            }
            VarId::FlowQ(l) => {
                let (f, t) = self.branch_ends[l];
                format!("Q[{f}-{t}]")
            }
            VarId::CurrentSq(l) => {
                let (f, t) = self.branch_ends[l];
                format!("csq[{f}-{t}]")
            }
            VarId::Aux(l) => {
                let (f, t) = self.branch_ends[l];
                format!("xp[{f}-{t}]")
            }
        }
    }

    pub fn is_measured(&self, index: usize) -> bool {
        self.measured[index]
    }

    pub fn measured_indices(&self) -> Vec<usize> {
        (0..self.dimension())
            .filter(|&k| self.measured[k])
            .collect()
    }

    pub fn branch_ends(&self, branch: usize) -> (usize, usize) {
        self.branch_ends[branch]
    }

    /// Stacks a power-flow solution into a global system vector (the truth
    /// vector used by scenario generation and oracle checks).
    pub fn stack<T: Scalar>(&self, sol: &PowerFlowSolution<T>) -> Vec<T> {
        let mut x = vec![T::zero(); self.dimension()];
        for bus in 1..=self.n_bus {
            x[self.injection_p(bus)] = sol.bus_p[bus - 1];
            x[self.injection_q(bus)] = sol.bus_q[bus - 1];
            x[self.voltage_sq(bus)] = sol.bus_voltage_sq[bus - 1];
        }
        for l in 0..self.branch_ends.len() {
            x[self.flow_p(l)] = sol.branch_flow_p[l];
            x[self.flow_q(l)] = sol.branch_flow_q[l];
            x[self.current_sq(l)] = sol.branch_current_sq[l];
            x[self.aux(l)] = sol.branch_aux[l];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse::parse_case;

    const TWO_BUS: &str = "\
[buses]
1 1 0 0
2 0 -0.1 0
[branches]
1 1 2 0.01 0.02
";

    #[test]
    fn dimension_and_counts() {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        let space = build_variable_space(&net, MeasuredPolicy::All).unwrap();
        assert_eq!(space.dimension(), 3 * 2 + 4 * 1);
        assert_eq!(space.measured_indices().len(), 10);
    }

    #[test]
    fn injections_only_marks_bus_variables() {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        let space = build_variable_space(&net, MeasuredPolicy::InjectionsOnly).unwrap();
        assert_eq!(space.measured_indices().len(), 6);
        assert!(space.is_measured(space.voltage_sq(2)));
        assert!(!space.is_measured(space.flow_p(0)));
    }

    #[test]
    fn explicit_mask() {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        let picks = vec![3, 5]; // p[2], vsq[2]
        let space = build_variable_space(&net, MeasuredPolicy::Explicit(picks)).unwrap();
        assert_eq!(space.measured_indices(), vec![3, 5]);
        assert!(build_variable_space(&net, MeasuredPolicy::Explicit(vec![10])).is_err());
    }

    #[test]
    fn names_and_descriptions_round_trip() {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        let space = build_variable_space(&net, MeasuredPolicy::All).unwrap();
        assert_eq!(space.var_name(0), "p[1]");
        assert_eq!(space.var_name(5), "vsq[2]");
        assert_eq!(space.var_name(6), "P[1-2]");
        assert_eq!(space.var_name(9), "xp[1-2]");
        assert_eq!(space.describe(7), VarId::FlowQ(0));
        assert_eq!(space.bus_of(4), Some(2));
        assert_eq!(space.branch_of(8), Some(0));
        assert_eq!(space.bus_of(8), None);
    }

    #[test]
    fn indexing_is_deterministic_across_parses() {
        let a = build_variable_space(&parse_case::<f64>(TWO_BUS).unwrap(), MeasuredPolicy::All)
            .unwrap();
        let b = build_variable_space(&parse_case::<f64>(TWO_BUS).unwrap(), MeasuredPolicy::All)
            .unwrap();
        let names_a: Vec<String> = (0..a.dimension()).map(|k| a.var_name(k)).collect();
        let names_b: Vec<String> = (0..b.dimension()).map(|k| b.var_name(k)).collect();
        assert_eq!(names_a, names_b);
    }
}
