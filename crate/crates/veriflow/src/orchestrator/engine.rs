use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use crate::admm::{
    consensus_gap, initialize, psi_update, seed_consensus_with, stitch, upsilon_update, x_update,
    AdmmState, Inbox, StartPolicy,
};
use crate::adversary::{perturb_outgoing_state, AttackSpec};
use crate::error::{Error, Result};
use crate::grid::{build_variable_space, parse_case, GridNetwork, SystemVariableSpace};
use crate::ledger::{encode_scalars, EntryKind, LedgerSet};
use crate::orchestrator::config::ScenarioConfig;
use crate::orchestrator::data::{apply_schedule_override, generate_scenario_data, ScenarioData};
use crate::orchestrator::report::{
    compute_deviations, ComponentEstimate, EstimateReport, PhaseOutcome, PhaseReport, PiRound,
    RunOutcome, RunReport, TraceRow,
};
use crate::partition::{
    assign_regions, build_region_views, connected_components, parse_region_mapping, remove_region,
    view_of, CommunicationGraph, RegionView,
};
use crate::scalar::Scalar;
use crate::trust::{check_verdict, DisagreementSample, TrustState, Verdict};

/// A finished run: the serializable report plus the typed pieces tests and
/// tooling want to poke at directly.
#[derive(Debug)]
pub struct RunArtifacts<T: Scalar> {
    pub report: RunReport,
    pub ledgers: LedgerSet,
    pub traces: Vec<TraceRow>,
    /// Stitched estimate per terminal phase, in phase order.
    pub estimates: Vec<ComponentEstimate<T>>,
    /// Region views that survived all isolations.
    pub surviving_views: Vec<RegionView<T>>,
    pub space: SystemVariableSpace,
    pub data: ScenarioData<T>,
}

impl<T: Scalar> RunArtifacts<T> {
    /// Writes every output file under `dir`; see
    /// [`crate::orchestrator::report::emit_outputs`].
    pub fn emit(&self, dir: &std::path::Path, emit_traces: bool) -> Result<Vec<std::path::PathBuf>> {
        crate::orchestrator::report::emit_outputs(
            &self.report,
            &self.ledgers,
            &self.traces,
            dir,
            emit_traces,
        )
    }
}

enum PhaseResult {
    Converged,
    Isolate(usize),
    Exhausted,
}

struct PhaseRun<T: Scalar> {
    report: PhaseReport,
    result: PhaseResult,
    states: Vec<AdmmState<T>>,
    estimate: Option<crate::admm::GlobalEstimate<T>>,
}

/// Runs the full verification protocol described by the scenario: generate
/// data, iterate each component to consensus while scoring disagreements,
/// isolate any region the committee convicts, and restart the survivors
/// until everything converges or the budgets run out.
pub fn run_verification<T: Scalar>(config: &ScenarioConfig<T>) -> Result<RunArtifacts<T>> {
    let started = Instant::now();

    let case_text = std::fs::read_to_string(&config.case_path).map_err(|e| {
        Error::Config(format!(
            "cannot read case {}: {e}",
            config.case_path.display()
        ))
    })?;
    let mut net: GridNetwork<T> = parse_case(&case_text)?;
    apply_schedule_override(&mut net, config)?;
    let space = build_variable_space(&net, config.measured)?;
    let mapping_text = std::fs::read_to_string(&config.region_mapping_path).map_err(|e| {
        Error::Config(format!(
            "cannot read region mapping {}: {e}",
            config.region_mapping_path.display()
        ))
    })?;
    let mapping = parse_region_mapping(&mapping_text)?;
    let assignment = assign_regions(&net, &mapping)?;
    let (views, graph) = build_region_views(&net, &space, &assignment)?;
    if let Some(attack) = &config.attack {
        attack.validate()?;
        let view = view_of(&views, attack.attacker)?;
        if let Some(targets) = &attack.targets {
            for &t in targets {
                if !view.is_neighbor(t) {
                    return Err(Error::Config(format!(
                        "attack target {t} is not a neighbor of region {}",
                        attack.attacker
                    )));
                }
            }
        }
    }
    let data = generate_scenario_data(&net, &space, &views, config)?;

    let region_ids: Vec<usize> = views.iter().map(|v| v.id()).collect();
    let edges = graph.edges();
    let mut ledgers = LedgerSet::new(&region_ids, &edges)?;
    let mut traces: Vec<TraceRow> = Vec::new();

    let budget = config
        .max_restarts
        .unwrap_or_else(|| region_ids.len().saturating_sub(1));
    let mut surviving_views = views.clone();
    let mut surviving_graph = graph;
    let mut warm: BTreeMap<usize, AdmmState<T>> = BTreeMap::new();
    let mut isolated: Vec<usize> = Vec::new();
    let mut restarts = 0usize;
    let mut phases: Vec<PhaseReport> = Vec::new();
    let mut estimates: Vec<ComponentEstimate<T>> = Vec::new();
    let mut any_exhausted = false;
    let mut queue: VecDeque<Vec<usize>> = connected_components(&surviving_graph).into();

    while let Some(component) = queue.pop_front() {
        let can_isolate = config.act_on_verdicts && restarts < budget;
        let warm_ref = if config.warm_restart { Some(&warm) } else { None };
        let run = run_phase(
            phases.len(),
            &component,
            &surviving_views,
            &surviving_graph,
            &space,
            config,
            &data,
            &mut ledgers,
            &mut traces,
            can_isolate,
            warm_ref,
        )?;
        match run.result {
            PhaseResult::Isolate(region) => {
                isolated.push(region);
                restarts += 1;
                if config.warm_restart {
                    for state in run.states {
                        if state.region() != region {
                            warm.insert(state.region(), state);
                        }
                    }
                }
                let (next_views, next_graph, components) =
                    remove_region(&surviving_views, &surviving_graph, region)?;
                surviving_views = next_views;
                surviving_graph = next_graph;
                for comp in components {
                    if comp.iter().all(|r| component.contains(r)) {
                        queue.push_back(comp);
                    }
                }
            }
            PhaseResult::Converged | PhaseResult::Exhausted => {
                let converged = matches!(run.result, PhaseResult::Converged);
                any_exhausted |= !converged;
                if let Some(estimate) = run.estimate {
                    estimates.push(ComponentEstimate {
                        regions: component.clone(),
                        estimate,
                        converged,
                    });
                }
            }
        }
        phases.push(run.report);
    }

    let outcome = if any_exhausted {
        RunOutcome::Exhausted
    } else if !isolated.is_empty() {
        RunOutcome::AttackerIsolated
    } else {
        RunOutcome::Converged
    };
    let deviations = compute_deviations(&space, &views, &data.schedule, &estimates, &isolated)?;
    let report = RunReport {
        outcome,
        isolated,
        restarts,
        phases,
        components_final: connected_components(&surviving_graph),
        deviations,
        ledger_entries: ledgers.total_entries(),
        wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
        scenario: config.echo.clone(),
    };
    Ok(RunArtifacts {
        report,
        ledgers,
        traces,
        estimates,
        surviving_views,
        space,
        data,
    })
}

/// Extracts every directed boundary message, lets the attacker tamper with
/// its outgoing copies, and records each message in the pairwise chain and
/// the trace log before delivery.
#[allow(clippy::too_many_arguments)]
fn collect_exchange<T: Scalar>(
    views: &[RegionView<T>],
    states: &[AdmmState<T>],
    attack: Option<&AttackSpec<T>>,
    round: usize,
    horizon: &[usize],
    space: &SystemVariableSpace,
    ledgers: &mut LedgerSet,
    traces: &mut Vec<TraceRow>,
    phase: usize,
) -> Result<Inbox<T>> {
    let mut inbox: Inbox<T> = BTreeMap::new();
    for (view, state) in views.iter().zip(states) {
        let src = view.id();
        for dst in view.neighbors().collect::<Vec<_>>() {
            let mut message = state.outgoing(view, dst)?;
            if let Some(spec) = attack {
                perturb_outgoing_state(spec, view, round, dst, horizon, &mut message)?;
            }
            let mut payload = Vec::new();
            for per_t in &message {
                payload.extend(encode_scalars(per_t));
            }
            ledgers.record_shared(src, dst, round, payload)?;
            let shared = view.shared_globals(dst)?;
            for (slot, per_t) in message.iter().enumerate() {
                for (&global, &value) in shared.iter().zip(per_t.iter()) {
                    traces.push(TraceRow {
                        phase,
                        round,
                        src,
                        dst,
                        t: horizon[slot],
                        var: space.var_name(global),
                        value: value.into_f64(),
                    });
                }
            }
            inbox.entry(dst).or_default().insert(src, message);
        }
    }
    Ok(inbox)
}

#[allow(clippy::too_many_arguments)]
fn run_phase<T: Scalar>(
    phase_idx: usize,
    component: &[usize],
    all_views: &[RegionView<T>],
    graph: &CommunicationGraph,
    space: &SystemVariableSpace,
    config: &ScenarioConfig<T>,
    data: &ScenarioData<T>,
    ledgers: &mut LedgerSet,
    traces: &mut Vec<TraceRow>,
    can_isolate: bool,
    warm: Option<&BTreeMap<usize, AdmmState<T>>>,
) -> Result<PhaseRun<T>> {
    if component.is_empty() {
        return Err(Error::Config("cannot verify an empty component".into()));
    }
    let views: Vec<RegionView<T>> = component
        .iter()
        .map(|&r| view_of(all_views, r).cloned())
        .collect::<Result<_>>()?;
    let mut comp_graph = CommunicationGraph::new(component.iter().copied());
    for (i, j) in graph.edges() {
        if component.contains(&i) && component.contains(&j) {
            comp_graph.add_edge(i, j)?;
        }
    }

    for view in &views {
        let mut payload = Vec::new();
        for &t in &config.admm.horizon {
            payload.extend(encode_scalars(data.measurements.get(view.id(), t)?));
        }
        ledgers.record_local(view.id(), EntryKind::Measurements, 0, payload)?;
    }

    let mut states: Vec<AdmmState<T>> = Vec::with_capacity(views.len());
    for view in &views {
        let mut state = initialize(view, space, &config.admm, StartPolicy::Flat)?;
        if let Some(stash) = warm {
            if let Some(previous) = stash.get(&view.id()) {
                state.warm_start_from(previous)?;
            }
        }
        states.push(state);
    }
    let seed_inbox = collect_exchange(
        &views,
        &states,
        None,
        0,
        &config.admm.horizon,
        space,
        ledgers,
        traces,
        phase_idx,
    )?;
    seed_consensus_with(&views, &mut states, &seed_inbox)?;

    let detection_active = views.len() >= 2;
    let mut trust = if detection_active {
        Some(TrustState::new(component)?)
    } else {
        None
    };
    let mut pi_history: Vec<PiRound> = Vec::new();
    let mut diagnostics: Vec<String> = Vec::new();
    let mut last_accused: Option<usize> = None;
    let mut ignored_noted = false;
    let mut best_margin: Option<f64> = None;
    let mut damped_rounds = 0usize;
    let mut raced = false;
    let mut result = PhaseResult::Exhausted;
    let mut settled_stop = false;
    let mut rounds = 0usize;
    let mut last_displacement = T::zero();
    let mut last_gap = T::zero();

    for k in 1..=config.admm.k_max {
        rounds = k;
        for (view, state) in views.iter().zip(states.iter_mut()) {
            x_update(view, state, &data.measurements, &config.admm)?;
            let mut payload = Vec::new();
            for slot in 0..state.time_slots() {
                payload.extend(encode_scalars(state.x(slot)));
            }
            ledgers.record_local(view.id(), EntryKind::AdmmState, k, payload)?;
        }

        let inbox = collect_exchange(
            &views,
            &states,
            config.attack.as_ref(),
            k,
            &config.admm.horizon,
            space,
            ledgers,
            traces,
            phase_idx,
        )?;

        let empty: BTreeMap<usize, Vec<Vec<T>>> = BTreeMap::new();
        let mut gap = T::zero();
        let mut samples: Vec<DisagreementSample<T>> = Vec::new();
        for (view, state) in views.iter().zip(states.iter()) {
            let received = inbox.get(&view.id()).unwrap_or(&empty);
            gap = gap.max(consensus_gap(view, state, received)?);
            for j in view.neighbors().collect::<Vec<_>>() {
                let messages = received.get(&j).ok_or_else(|| {
                    Error::Config(format!(
                        "region {} missing message from neighbor {j}",
                        view.id()
                    ))
                })?;
                let mut sum_sq = T::zero();
                let mut shared_len = 0usize;
                for (slot, message) in messages.iter().enumerate() {
                    let mine = view.extract_shared(state.x(slot), j)?;
                    shared_len = mine.len();
                    for (a, b) in mine.iter().zip(message.iter()) {
                        let d = *a - *b;
                        sum_sq += d * d;
                    }
                }
                samples.push(DisagreementSample {
                    observer: view.id(),
                    about: j,
                    sum_sq,
                    shared_len,
                    time_slots: state.time_slots(),
                });
            }
        }

        for (view, state) in views.iter().zip(states.iter_mut()) {
            let received = inbox.get(&view.id()).unwrap_or(&empty);
            psi_update(view, state, received)?;
            upsilon_update(view, state, &config.admm)?;
        }
        let displacement = states
            .iter()
            .map(|s| s.displacement())
            .fold(T::zero(), T::max);
        last_displacement = displacement;
        last_gap = gap;

        let mut verdict = Verdict::NotReady;
        let mut margin: Option<T> = None;
        if let Some(trust) = trust.as_mut() {
            trust.record_round(&samples)?;
            for view in &views {
                let i = view.id();
                let row: Vec<T> = component
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| trust.disagreement(i, j))
                    .collect();
                ledgers.record_global(i, EntryKind::Disagreement, k, encode_scalars(&row))?;
            }
            trust.update_scores(&comp_graph, &config.detection)?;
            ledgers.record_global(
                component[0],
                EntryKind::TrustScore,
                k,
                encode_scalars(trust.scores()),
            )?;
            pi_history.push(PiRound {
                round: k,
                scores: trust.scores().iter().map(|v| v.into_f64()).collect(),
            });
            if trust.damped() {
                damped_rounds += 1;
            }
            let outcome = check_verdict(trust, &config.detection);
            verdict = outcome.verdict;
            margin = outcome.margin;
            if let Some(m) = margin {
                let m = m.into_f64();
                best_margin = Some(best_margin.map_or(m, |b| b.max(m)));
            }
        }

        let accused = match verdict {
            Verdict::Attacker(region) => Some(region),
            _ => None,
        };
        if accused != last_accused {
            if let Some(region) = accused {
                let payload = [T::from_f64(region as f64), margin.unwrap_or_else(T::zero)];
                ledgers.record_global(component[0], EntryKind::Verdict, k, encode_scalars(&payload))?;
            }
            last_accused = accused;
        }

        let converged = displacement <= config.admm.epsilon && gap <= config.admm.epsilon;
        if converged {
            if let Some(region) = accused {
                raced = true;
                diagnostics.push(format!(
                    "round {k}: verdict against region {region} raced convergence; convergence wins"
                ));
            }
            result = PhaseResult::Converged;
            break;
        }
        if let Some(region) = accused {
            if can_isolate {
                result = PhaseResult::Isolate(region);
                break;
            }
            if !ignored_noted {
                diagnostics.push(format!(
                    "round {k}: verdict against region {region} recorded but not acted on"
                ));
                ignored_noted = true;
            }
        } else if config.stop_when_scores_settle && matches!(verdict, Verdict::NoAttacker) {
            diagnostics.push(format!(
                "round {k}: trust scores settled with no attacker; stopping early"
            ));
            settled_stop = true;
            result = PhaseResult::Exhausted;
            break;
        }
    }

    if matches!(result, PhaseResult::Exhausted) && !settled_stop {
        diagnostics.push(format!(
            "no convergence within {} rounds",
            config.admm.k_max
        ));
    }

    let estimate = match result {
        PhaseResult::Converged | PhaseResult::Exhausted => Some(stitch(&views, &states)?),
        PhaseResult::Isolate(_) => None,
    };
    let report = PhaseReport {
        index: phase_idx,
        regions: component.to_vec(),
        rounds,
        outcome: match result {
            PhaseResult::Converged => PhaseOutcome::Converged,
            PhaseResult::Isolate(region) => PhaseOutcome::AttackerIsolated { region },
            PhaseResult::Exhausted => PhaseOutcome::Exhausted,
        },
        final_displacement: last_displacement.into_f64(),
        final_gap: last_gap.into_f64(),
        verdict_margin: best_margin,
        damped_rounds,
        raced_convergence: raced,
        diagnostics,
        pi_history,
        estimate: estimate.as_ref().map(EstimateReport::from_estimate),
    };
    Ok(PhaseRun {
        report,
        result,
        states,
        estimate,
    })
}
