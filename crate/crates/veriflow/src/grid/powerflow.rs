use crate::error::{Error, Result};
use crate::grid::network::GridNetwork;
use crate::scalar::Scalar;

/// Convergence controls for the backward/forward sweep oracle.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions<T> {
    /// Stop when the largest per-quantity change between sweeps drops below
    /// this value.
    pub tolerance: T,
    pub max_sweeps: usize,
}

impl<T: Scalar> Default for SweepOptions<T> {
    fn default() -> Self {
        SweepOptions {
            tolerance: T::from_f64(1e-10),
            max_sweeps: 200,
        }
    }
}

/// Full nonlinear branch-flow state of a radial network.
///
/// Vectors are indexed by bus rank (`bus id - 1`) and by branch array index
/// respectively. The substation's injections are back-computed from the root
/// branch flows so the solution balances the feeder exactly.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution<T> {
    pub bus_p: Vec<T>,
    pub bus_q: Vec<T>,
    pub bus_voltage_sq: Vec<T>,
    pub branch_flow_p: Vec<T>,
    pub branch_flow_q: Vec<T>,
    pub branch_current_sq: Vec<T>,
    /// Sending-end squared voltage recovered through the current definition:
    /// (P² + Q²)/c², or the sending-end voltage itself on unloaded branches.
    pub branch_aux: Vec<T>,
    pub iterations: usize,
    pub max_mismatch: T,
}

/// Solves the nonlinear branch-flow equations with scheduled injections.
pub fn solve_power_flow<T: Scalar>(net: &GridNetwork<T>) -> Result<PowerFlowSolution<T>> {
    let (p, q) = net.scheduled_injections();
    solve_power_flow_with(net, &p, &q, SweepOptions::default())
}

/// Solves the nonlinear branch-flow equations for the given per-bus
/// injections (indexed by bus rank; loads negative). Substation entries are
/// ignored: its voltage is pinned at 1 p.u. and its injection balances the
/// feeder.
///
/// The solver is a fixed-point backward/forward sweep: flows accumulate from
/// the leaves using the previous squared currents, then voltages propagate
/// from the substation and squared currents are refreshed.
pub fn solve_power_flow_with<T: Scalar>(
    net: &GridNetwork<T>,
    p: &[T],
    q: &[T],
    options: SweepOptions<T>,
) -> Result<PowerFlowSolution<T>> {
    let n = net.bus_count();
    if p.len() != n || q.len() != n {
        return Err(Error::Dimension {
            context: "solve_power_flow injections",
            expected: n,
            got: p.len().min(q.len()),
        });
    }
    let e = net.branch_count();
    let substation = net.substation();
    let depth_order = net.buses_by_depth();

    let mut flow_p = vec![T::zero(); e];
    let mut flow_q = vec![T::zero(); e];
    let mut current_sq = vec![T::zero(); e];
    let mut voltage_sq = vec![T::one(); n];
    let mut iterations = 0;
    let mut mismatch = T::infinity();

    for sweep in 0..options.max_sweeps {
        iterations = sweep + 1;
        // Backward: accumulate flows leaf-to-root with the previous currents.
        let mut next_p = vec![T::zero(); e];
        let mut next_q = vec![T::zero(); e];
        for &bus in depth_order.iter().rev() {
            if bus == substation {
                continue;
            }
            let idx = net.parent_branch(bus).expect("non-root bus has a parent");
            let br = &net.branches()[idx];
            let mut acc_p = p[bus - 1] + br.resistance * current_sq[idx];
            let mut acc_q = q[bus - 1] + br.reactance * current_sq[idx];
            for &child in net.child_branches(bus) {
                acc_p = acc_p + next_p[child];
                acc_q = acc_q + next_q[child];
            }
            next_p[idx] = acc_p;
            next_q[idx] = acc_q;
        }
        // Forward: propagate voltages root-to-leaf, refresh currents.
        let mut next_v = vec![T::one(); n];
        let mut next_c = vec![T::zero(); e];
        for &bus in &depth_order {
            if bus == substation {
                continue;
            }
            let idx = net.parent_branch(bus).expect("non-root bus has a parent");
            let br = &net.branches()[idx];
            let two = T::from_f64(2.0);
            let from_v = next_v[br.from_bus - 1];
            next_v[bus - 1] = from_v
                - two * (br.resistance * next_p[idx] + br.reactance * next_q[idx])
                + br.impedance_magnitude_sq() * current_sq[idx];
            next_c[idx] = (next_p[idx] * next_p[idx] + next_q[idx] * next_q[idx]) / from_v;
        }

        // NaN deltas (diverged iterates) must poison the mismatch rather than
        // be dropped by IEEE max, or divergence would look like convergence.
        let mut finite = true;
        mismatch = T::zero();
        {
            let mut track = |d: T| {
                if d.is_finite() {
                    mismatch = mismatch.max(d);
                } else {
                    finite = false;
                }
            };
            for i in 0..e {
                track((next_p[i] - flow_p[i]).abs());
                track((next_q[i] - flow_q[i]).abs());
                track((next_c[i] - current_sq[i]).abs());
            }
            for b in 0..n {
                track((next_v[b] - voltage_sq[b]).abs());
            }
        }
        if !finite {
            mismatch = T::nan();
        }
        flow_p = next_p;
        flow_q = next_q;
        current_sq = next_c;
        voltage_sq = next_v;
        if mismatch < options.tolerance {
            let mut bus_p = p.to_vec();
            let mut bus_q = q.to_vec();
            let mut root_p = T::zero();
            let mut root_q = T::zero();
            for &idx in net.child_branches(substation) {
                root_p = root_p + flow_p[idx];
                root_q = root_q + flow_q[idx];
            }
            bus_p[substation - 1] = -root_p;
            bus_q[substation - 1] = -root_q;
            let branch_aux = (0..e)
                .map(|i| {
                    if current_sq[i] != T::zero() {
                        (flow_p[i] * flow_p[i] + flow_q[i] * flow_q[i]) / current_sq[i]
                    } else {
                        voltage_sq[net.branches()[i].from_bus - 1]
                    }
                })
                .collect();
            return Ok(PowerFlowSolution {
                bus_p,
                bus_q,
                bus_voltage_sq: voltage_sq,
                branch_flow_p: flow_p,
                branch_flow_q: flow_q,
                branch_current_sq: current_sq,
                branch_aux,
                iterations,
                max_mismatch: mismatch,
            });
        }
    }
    Err(Error::NoConvergence(format!(
        "power-flow sweep mismatch {:?} after {} sweeps",
        mismatch, iterations
    )))
}
