use std::collections::BTreeMap;

use crate::admm::config::{AdmmConfig, MeasurementSet};
use crate::error::{Error, Result};
use crate::grid::{SystemVariableSpace, VarId};
use crate::linalg::{inf_norm_diff, Cholesky, Matrix};
use crate::partition::RegionView;
use crate::scalar::Scalar;

/// How a region seeds its first iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartPolicy {
    /// Squared voltages start at 1, everything else at 0.
    Flat,
    /// Flat, plus own scheduled injections seeded with their scheduled values.
    ScheduleSeeded,
}

/// One region's iterates and cached solver.
///
/// Per time slot the region holds its estimate `x`, the neighbour-average
/// `psi`, and the running dual `upsilon`. The x-update system matrix is
/// factored once at initialization and reused every round.
#[derive(Clone)]
pub struct AdmmState<T> {
    region: usize,
    k: usize,
    x: Vec<Vec<T>>,
    x_prev: Vec<Vec<T>>,
    psi: Vec<Vec<T>>,
    psi_prev: Vec<Vec<T>>,
    upsilon: Vec<Vec<T>>,
    factor: Cholesky<T>,
}

impl<T: Scalar> std::fmt::Debug for AdmmState<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdmmState")
            .field("region", &self.region)
            .field("k", &self.k)
            .field("dimension", &self.x.first().map_or(0, Vec::len))
            .field("time_slots", &self.x.len())
            .finish()
    }
}

fn system_matrix<T: Scalar>(view: &RegionView<T>, config: &AdmmConfig<T>) -> Matrix<T> {
    let m = view.dimension();
    let mut a = Matrix::zeros(m, m);
    for row in 0..view.constraints().rows() {
        let entries: Vec<(usize, T)> = view.constraints().row(row).collect();
        for &(ci, vi) in &entries {
            for &(cj, vj) in &entries {
                a.row_mut(ci)[cj] += vi * vj;
            }
        }
    }
    for &k in view.measured_local() {
        a.row_mut(k)[k] += T::one();
    }
    let sched_w = if config.paper_literal_update {
        T::one()
    } else {
        config.c1
    };
    for &k in view.scheduled_local() {
        a.row_mut(k)[k] += sched_w;
    }
    for (k, &d) in view.degree().iter().enumerate() {
        a.row_mut(k)[k] += config.c2 * d;
    }
    if let Some(r) = config.ridge {
        for k in 0..m {
            a.row_mut(k)[k] += r;
        }
    }
    a
}

/// Builds the region's initial state: seeds x₀ per the policy and factors the
/// x-update system. Fails when the system is not positive definite, which
/// signals an under-determined region (too few measurements and constraints).
pub fn initialize<T: Scalar>(
    view: &RegionView<T>,
    space: &SystemVariableSpace,
    config: &AdmmConfig<T>,
    policy: StartPolicy,
) -> Result<AdmmState<T>> {
    config.validate()?;
    let m = view.dimension();
    let mut x0 = vec![T::zero(); m];
    for (k, &g) in view.local_variables().iter().enumerate() {
        if matches!(space.describe(g), VarId::VoltageSq(_)) {
            x0[k] = T::one();
        }
    }
    if policy == StartPolicy::ScheduleSeeded {
        for (slot, &k) in view.scheduled_local().iter().enumerate() {
            x0[k] = view.schedule()[slot];
        }
    }
    let factor = Cholesky::factor(&system_matrix(view, config)).map_err(|e| {
        Error::Linalg(format!(
            "region {} x-update system is not positive definite ({e}); \
             the region is under-determined",
            view.id()
        ))
    })?;
    let slots = config.horizon.len();
    Ok(AdmmState {
        region: view.id(),
        k: 0,
        x: vec![x0.clone(); slots],
        x_prev: vec![x0; slots],
        psi: vec![vec![T::zero(); m]; slots],
        psi_prev: vec![vec![T::zero(); m]; slots],
        upsilon: vec![vec![T::zero(); m]; slots],
        factor,
    })
}

/// Seeds the consensus variables with one exchange of the initial iterates:
/// ψ₀ becomes the neighbour average of x₀ on shared entries and υ₀ = ½(ψ₀+x₀).
pub fn seed_consensus<T: Scalar>(
    views: &[RegionView<T>],
    states: &mut [AdmmState<T>],
) -> Result<()> {
    let messages = exchange_all(views, states, |_, _, msg| msg)?;
    seed_consensus_with(views, states, &messages)
}

/// Same as [`seed_consensus`], but with the seed exchange already performed.
/// Lets a caller that wants to log or inspect the seed messages build the
/// inbox itself.
pub fn seed_consensus_with<T: Scalar>(
    views: &[RegionView<T>],
    states: &mut [AdmmState<T>],
    messages: &Inbox<T>,
) -> Result<()> {
    for (view, state) in views.iter().zip(states.iter_mut()) {
        apply_psi(view, state, messages.get(&view.id()))?;
        for t in 0..state.x.len() {
            for k in 0..view.dimension() {
                let half = T::from_f64(0.5);
                state.upsilon[t][k] = half * (state.psi[t][k] + state.x[t][k]);
            }
        }
    }
    Ok(())
}

/// Per destination region, the per-source per-time shared slices delivered in
/// one exchange.
pub type Inbox<T> = BTreeMap<usize, BTreeMap<usize, Vec<Vec<T>>>>;

/// Extracts every directed message, applying `tamper(src, dst, msg)` to each.
/// Returns, per destination region, the per-source per-time shared slices.
pub fn exchange_all<T: Scalar>(
    views: &[RegionView<T>],
    states: &[AdmmState<T>],
    mut tamper: impl FnMut(usize, usize, Vec<Vec<T>>) -> Vec<Vec<T>>,
) -> Result<Inbox<T>> {
    let mut inbox: Inbox<T> = BTreeMap::new();
    for (view, state) in views.iter().zip(states.iter()) {
        for dst in view.neighbors().collect::<Vec<_>>() {
            let mut per_t = Vec::with_capacity(state.x.len());
            for t in 0..state.x.len() {
                per_t.push(view.extract_shared(&state.x[t], dst)?);
            }
            let sent = tamper(view.id(), dst, per_t);
            inbox.entry(dst).or_default().insert(view.id(), sent);
        }
    }
    Ok(inbox)
}

impl<T: Scalar> AdmmState<T> {
    pub fn region(&self) -> usize {
        self.region
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn x(&self, t_slot: usize) -> &[T] {
        &self.x[t_slot]
    }

    pub fn psi(&self, t_slot: usize) -> &[T] {
        &self.psi[t_slot]
    }

    pub fn upsilon(&self, t_slot: usize) -> &[T] {
        &self.upsilon[t_slot]
    }

    pub fn time_slots(&self) -> usize {
        self.x.len()
    }

    /// Largest per-entry move of the most recent x-update, over all times.
    pub fn displacement(&self) -> T {
        (0..self.x.len())
            .map(|t| inf_norm_diff(&self.x[t], &self.x_prev[t]))
            .fold(T::zero(), T::max)
    }

    /// The outgoing message S_ij x⁽ⁱ⁾(t) for each time slot.
    pub fn outgoing(&self, view: &RegionView<T>, neighbor: usize) -> Result<Vec<Vec<T>>> {
        (0..self.x.len())
            .map(|t| view.extract_shared(&self.x[t], neighbor))
            .collect()
    }

    /// Copies the primal iterates of an earlier run into this freshly
    /// initialized state, keeping the new factorization. Used when a restart
    /// should resume from where the previous phase left off.
    pub fn warm_start_from(&mut self, previous: &AdmmState<T>) -> Result<()> {
        if previous.region != self.region {
            return Err(Error::Config(format!(
                "cannot warm-start region {} from region {}",
                self.region, previous.region
            )));
        }
        if previous.x.len() != self.x.len() || previous.x[0].len() != self.x[0].len() {
            return Err(Error::Dimension {
                context: "warm start iterate",
                expected: self.x.len() * self.x[0].len(),
                got: previous.x.len() * previous.x[0].len(),
            });
        }
        self.x = previous.x.clone();
        self.x_prev = previous.x.clone();
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn set_x_for_test(&mut self, t_slot: usize, k: usize, value: T) {
        self.x[t_slot][k] = value;
    }
}

/// Largest gap between this region's own shared entries and the copies it
/// received, over all neighbors and time slots. Received copies may have been
/// tampered with in transit, so a persistent gap is the first observable sign
/// of either non-convergence or an active attack.
pub fn consensus_gap<T: Scalar>(
    view: &RegionView<T>,
    state: &AdmmState<T>,
    received: &BTreeMap<usize, Vec<Vec<T>>>,
) -> Result<T> {
    let mut worst = T::zero();
    for j in view.neighbors().collect::<Vec<_>>() {
        let msgs = received.get(&j).ok_or_else(|| {
            Error::Config(format!(
                "region {} missing message from neighbor {j}",
                view.id()
            ))
        })?;
        for (t, msg) in msgs.iter().enumerate() {
            let mine = view.extract_shared(state.x(t), j)?;
            if msg.len() != mine.len() {
                return Err(Error::Dimension {
                    context: "shared message length",
                    expected: mine.len(),
                    got: msg.len(),
                });
            }
            worst = worst.max(inf_norm_diff(&mine, msg));
        }
    }
    Ok(worst)
}

/// Solves the cached system for each time slot with the round-k right-hand
/// side S_aᵀs + c1·S_pᵀ𝔭* + c2·D·υ_k and advances the iterate history.
pub fn x_update<T: Scalar>(
    view: &RegionView<T>,
    state: &mut AdmmState<T>,
    measurements: &MeasurementSet<T>,
    config: &AdmmConfig<T>,
) -> Result<()> {
    let m = view.dimension();
    let sched_w = if config.paper_literal_update {
        T::one()
    } else {
        config.c1
    };
    for (slot, &t) in config.horizon.iter().enumerate() {
        let s = measurements.get(view.id(), t)?;
        if s.len() != view.measured_local().len() {
            return Err(Error::Dimension {
                context: "measurement slice in x-update",
                expected: view.measured_local().len(),
                got: s.len(),
            });
        }
        let mut rhs = vec![T::zero(); m];
        for (row, &k) in view.measured_local().iter().enumerate() {
            rhs[k] += s[row];
        }
        for (row, &k) in view.scheduled_local().iter().enumerate() {
            rhs[k] += sched_w * view.schedule()[row];
        }
        for (k, &d) in view.degree().iter().enumerate() {
            rhs[k] += config.c2 * d * state.upsilon[slot][k];
        }
        let next = state.factor.solve(&rhs);
        state.x_prev[slot] = std::mem::replace(&mut state.x[slot], next);
    }
    state.k += 1;
    Ok(())
}

fn apply_psi<T: Scalar>(
    view: &RegionView<T>,
    state: &mut AdmmState<T>,
    from: Option<&BTreeMap<usize, Vec<Vec<T>>>>,
) -> Result<()> {
    let m = view.dimension();
    let neighbors: Vec<usize> = view.neighbors().collect();
    for t in 0..state.time_slots() {
        let mut acc = vec![T::zero(); m];
        for &j in &neighbors {
            let msgs = from
                .and_then(|map| map.get(&j))
                .ok_or_else(|| Error::Config(format!(
                    "region {} missing message from neighbor {j}",
                    view.id()
                )))?;
            let msg = &msgs[t];
            let shared = view.shared_with(j)?;
            if msg.len() != shared.len() {
                return Err(Error::Dimension {
                    context: "shared message length",
                    expected: shared.len(),
                    got: msg.len(),
                });
            }
            for (slot, &k) in shared.iter().enumerate() {
                acc[k] += msg[slot];
            }
        }
        let next: Vec<T> = acc
            .iter()
            .zip(view.degree_pinv())
            .map(|(&a, &dbar)| a * dbar)
            .collect();
        state.psi_prev[t] = std::mem::replace(&mut state.psi[t], next);
    }
    Ok(())
}

/// Replaces ψ with the neighbour average of the received shared slices.
pub fn psi_update<T: Scalar>(
    view: &RegionView<T>,
    state: &mut AdmmState<T>,
    messages: &BTreeMap<usize, Vec<Vec<T>>>,
) -> Result<()> {
    apply_psi(view, state, Some(messages))
}

/// Advances the dual: υ += ψ_new − ½(ψ_old + x_old), or the canonical
/// υ += ψ_new − x_new when configured.
pub fn upsilon_update<T: Scalar>(
    view: &RegionView<T>,
    state: &mut AdmmState<T>,
    config: &AdmmConfig<T>,
) -> Result<()> {
    let half = T::from_f64(0.5);
    for t in 0..state.time_slots() {
        for k in 0..view.dimension() {
            let delta = if config.canonical_dual_update {
                state.psi[t][k] - state.x[t][k]
            } else {
                state.psi[t][k] - half * (state.psi_prev[t][k] + state.x_prev[t][k])
            };
            state.upsilon[t][k] += delta;
        }
    }
    Ok(())
}

/// Per-region convergence test on the ∞-norm displacement over all times.
pub fn has_converged<T: Scalar>(state: &AdmmState<T>, config: &AdmmConfig<T>) -> bool {
    state.k > 0 && state.displacement() <= config.epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::config::NoiseDescriptor;
    use crate::grid::{build_variable_space, parse_case, solve_power_flow, MeasuredPolicy};
    use crate::partition::{assign_regions, build_region_views};

    const TWO_BUS: &str = "\
[buses]
1 1 0 0
2 0 -0.1 0
[branches]
1 1 2 0.01 0.02
";

    fn setup(
        split: bool,
    ) -> (
        Vec<RegionView<f64>>,
        Vec<T64>,
        MeasurementSet<f64>,
        AdmmConfig<f64>,
        Vec<f64>,
    ) {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        let space = build_variable_space(&net, MeasuredPolicy::All).unwrap();
        let mapping = if split {
            [(1, 1), (2, 2)]
        } else {
            [(1, 1), (2, 1)]
        };
        let assignment = assign_regions(&net, &mapping.into()).unwrap();
        let (views, _) = build_region_views(&net, &space, &assignment).unwrap();
        let truth = space.stack(&solve_power_flow(&net).unwrap());
        let config = AdmmConfig::default();
        let meas = MeasurementSet::from_global(
            &views,
            &config.horizon,
            &[truth.clone()],
            NoiseDescriptor::none(),
        )
        .unwrap();
        let states = views
            .iter()
            .map(|v| initialize(v, &space, &config, StartPolicy::Flat).unwrap())
            .collect();
        (views, states, meas, config, truth)
    }

    type T64 = AdmmState<f64>;

    fn run_round(
        views: &[RegionView<f64>],
        states: &mut [T64],
        meas: &MeasurementSet<f64>,
        config: &AdmmConfig<f64>,
    ) {
        for (v, s) in views.iter().zip(states.iter_mut()) {
            x_update(v, s, meas, config).unwrap();
        }
        let inbox = exchange_all(views, states, |_, _, m| m).unwrap();
        for (v, s) in views.iter().zip(states.iter_mut()) {
            let empty = BTreeMap::new();
            let msgs = inbox.get(&v.id()).unwrap_or(&empty);
            psi_update(v, s, msgs).unwrap();
            upsilon_update(v, s, config).unwrap();
        }
    }

    #[test]
    fn truth_is_a_fixed_point() {
        let (views, mut states, meas, config, truth) = setup(true);
        for (v, s) in views.iter().zip(states.iter_mut()) {
            let local = v.restrict(&truth).unwrap();
            s.x[0] = local.clone();
            s.x_prev[0] = local.clone();
            s.psi[0] = local.clone();
            s.psi_prev[0] = local.clone();
            s.upsilon[0] = local;
        }
        run_round(&views, &mut states, &meas, &config);
        for (v, s) in views.iter().zip(states.iter()) {
            let local = v.restrict(&truth).unwrap();
            assert!(inf_norm_diff(s.x(0), &local) < 1e-12, "region {}", v.id());
            assert!(s.displacement() < 1e-12);
        }
    }

    #[test]
    fn flat_start_converges_on_two_bus_split() {
        let (views, mut states, meas, config, truth) = setup(true);
        seed_consensus(&views, &mut states).unwrap();
        let mut converged = false;
        for _ in 0..config.k_max {
            run_round(&views, &mut states, &meas, &config);
            if states.iter().all(|s| has_converged(s, &config)) {
                converged = true;
                break;
            }
        }
        assert!(converged);
        for (v, s) in views.iter().zip(states.iter()) {
            let local = v.restrict(&truth).unwrap();
            assert!(inf_norm_diff(s.x(0), &local) < 1e-2);
        }
    }

    #[test]
    fn single_region_solves_directly() {
        let (views, mut states, meas, config, truth) = setup(false);
        seed_consensus(&views, &mut states).unwrap();
        assert!(states[0].psi(0).iter().all(|&v| v == 0.0));
        let expected_ups: Vec<f64> = states[0].x(0).iter().map(|&v| 0.5 * v).collect();
        assert_eq!(states[0].upsilon(0), expected_ups.as_slice());
        run_round(&views, &mut states, &meas, &config);
        assert!(inf_norm_diff(states[0].x(0), &truth) < 1e-9);
    }

    #[test]
    fn psi_update_requires_all_messages() {
        let (views, mut states, _, _, _) = setup(true);
        let empty = BTreeMap::new();
        assert!(psi_update(&views[0], &mut states[0], &empty).is_err());
    }

    #[test]
    fn schedule_seeded_start_sets_injections() {
        let net = parse_case::<f64>(TWO_BUS).unwrap();
        let space = build_variable_space(&net, MeasuredPolicy::All).unwrap();
        let assignment = assign_regions(&net, &[(1, 1), (2, 1)].into()).unwrap();
        let (views, _) = build_region_views(&net, &space, &assignment).unwrap();
        let config = AdmmConfig::default();
        let state =
            initialize(&views[0], &space, &config, StartPolicy::ScheduleSeeded).unwrap();
        let k = views[0].local_index(space.injection_p(2)).unwrap();
        assert_eq!(state.x(0)[k], -0.1);
        let kv = views[0].local_index(space.voltage_sq(2)).unwrap();
        assert_eq!(state.x(0)[kv], 1.0);
    }
}
