use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::admm::GlobalEstimate;
use crate::error::{Error, Result};
use crate::grid::SystemVariableSpace;
use crate::ledger::LedgerSet;
use crate::orchestrator::config::ScenarioFile;
use crate::partition::RegionView;
use crate::scalar::Scalar;

/// Overall result of a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    /// Every surviving component reached consensus within tolerance.
    Converged,
    /// At least one region was isolated and the survivors converged.
    AttackerIsolated,
    /// Some component ran out of rounds or restarts without converging.
    Exhausted,
}

impl RunOutcome {
    /// Process exit code for the command line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            RunOutcome::Converged => 0,
            RunOutcome::AttackerIsolated => 2,
            RunOutcome::Exhausted => 3,
        }
    }
}

/// Result of one verification phase (one component, one run of rounds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseOutcome {
    Converged,
    AttackerIsolated { region: usize },
    Exhausted,
}

/// Trust scores after one scoring round, ordered like the phase's region list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiRound {
    pub round: usize,
    pub scores: Vec<f64>,
}

/// A stitched estimate restricted to the variables a component could see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Global variable indices the values refer to, ascending.
    pub support: Vec<usize>,
    /// One value vector per horizon slot, aligned with `support`.
    pub per_t: Vec<Vec<f64>>,
}

impl EstimateReport {
    pub fn from_estimate<T: Scalar>(estimate: &GlobalEstimate<T>) -> Self {
        EstimateReport {
            support: estimate.support().to_vec(),
            per_t: (0..estimate.time_slots())
                .map(|t| estimate.values(t).iter().map(|v| v.into_f64()).collect())
                .collect(),
        }
    }
}

/// Everything that happened while verifying one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub index: usize,
    /// Regions in the component, ascending.
    pub regions: Vec<usize>,
    /// Rounds actually executed.
    pub rounds: usize,
    pub outcome: PhaseOutcome,
    /// Largest per-region iterate move in the final round.
    pub final_displacement: f64,
    /// Largest boundary mismatch against received copies in the final round.
    pub final_gap: f64,
    /// Best (largest) score margin over the detection threshold seen in any
    /// eligible round; negative when nobody ever crossed it.
    pub verdict_margin: Option<f64>,
    /// Rounds whose score fixed point needed the damped restart.
    pub damped_rounds: usize,
    /// True when a verdict fired in the same round the component converged.
    pub raced_convergence: bool,
    pub diagnostics: Vec<String>,
    pub pi_history: Vec<PiRound>,
    /// Stitched estimate for phases that ended by converging or exhausting;
    /// absent when the phase ended by isolating a region.
    pub estimate: Option<EstimateReport>,
}

/// Scheduled-versus-verified comparison for one bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub bus: usize,
    pub region: usize,
    pub scheduled: f64,
    /// Verified injection from the owning component's converged estimate;
    /// absent when the owner was isolated or its component never converged.
    pub verified: Option<f64>,
    pub deviation: Option<f64>,
}

/// Full machine-readable record of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub outcome: RunOutcome,
    /// Regions isolated during the run, in isolation order.
    pub isolated: Vec<usize>,
    pub restarts: usize,
    pub phases: Vec<PhaseReport>,
    /// Components of the surviving communication graph.
    pub components_final: Vec<Vec<usize>>,
    /// Per-bus deviations sorted by absolute deviation, largest first;
    /// buses without a verified value come last.
    pub deviations: Vec<DeviationRow>,
    pub ledger_entries: usize,
    pub wall_clock_ms: f64,
    /// The scenario as loaded, echoed for reproducibility.
    pub scenario: ScenarioFile,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        self.outcome.exit_code()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from)
    }
}

/// One shared value as it crossed a region boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub phase: usize,
    pub round: usize,
    pub src: usize,
    pub dst: usize,
    pub t: usize,
    pub var: String,
    pub value: f64,
}

/// Compares every bus's scheduled active injection with the verified value
/// from the estimate of the component that owns it. Buses owned by isolated
/// regions, or by components that never converged, get no verified value.
pub fn compute_deviations<T: Scalar>(
    space: &SystemVariableSpace,
    original_views: &[RegionView<T>],
    schedule: &[(usize, T)],
    estimates: &[ComponentEstimate<T>],
    isolated: &[usize],
) -> Result<Vec<DeviationRow>> {
    let mut rows = Vec::with_capacity(schedule.len());
    for &(bus, sched) in schedule {
        let region = original_views
            .iter()
            .find(|v| v.own_buses().contains(&bus))
            .map(|v| v.id())
            .ok_or_else(|| Error::Topology(format!("bus {bus} belongs to no region")))?;
        let verified = if isolated.contains(&region) {
            None
        } else {
            estimates
                .iter()
                .find(|e| e.converged && e.regions.contains(&region))
                .and_then(|e| e.estimate.get(0, space.injection_p(bus)))
                .map(|v| v.into_f64())
        };
        let scheduled = sched.into_f64();
        rows.push(DeviationRow {
            bus,
            region,
            scheduled,
            verified,
            deviation: verified.map(|v| scheduled - v),
        });
    }
    rows.sort_by(|a, b| {
        let ka = a.deviation.map(f64::abs);
        let kb = b.deviation.map(f64::abs);
        match (ka, kb) {
            (Some(x), Some(y)) => y.partial_cmp(&x).unwrap().then(a.bus.cmp(&b.bus)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.bus.cmp(&b.bus),
        }
    });
    Ok(rows)
}

/// A component's stitched estimate together with whether its phase converged.
#[derive(Debug, Clone)]
pub struct ComponentEstimate<T> {
    pub regions: Vec<usize>,
    pub estimate: GlobalEstimate<T>,
    pub converged: bool,
}

/// Writes the report, score histories, deviations, optional boundary traces,
/// and all ledger chains under `dir`. Returns the files written.
pub fn emit_outputs(
    report: &RunReport,
    ledgers: &LedgerSet,
    traces: &[TraceRow],
    dir: &Path,
    emit_traces: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let report_path = dir.join("report.json");
    fs::write(&report_path, report.to_json()?)?;
    written.push(report_path);

    let mut pi_rounds = String::from("phase,round,region,score\n");
    let mut pi_final = String::from("phase,region,score\n");
    for phase in &report.phases {
        for snap in &phase.pi_history {
            for (region, score) in phase.regions.iter().zip(&snap.scores) {
                let _ = writeln!(pi_rounds, "{},{},{},{}", phase.index, snap.round, region, score);
            }
        }
        if let Some(last) = phase.pi_history.last() {
            for (region, score) in phase.regions.iter().zip(&last.scores) {
                let _ = writeln!(pi_final, "{},{},{}", phase.index, region, score);
            }
        }
    }
    let pi_rounds_path = dir.join("pi_rounds.csv");
    fs::write(&pi_rounds_path, pi_rounds)?;
    written.push(pi_rounds_path);
    let pi_final_path = dir.join("pi_final.csv");
    fs::write(&pi_final_path, pi_final)?;
    written.push(pi_final_path);

    let mut deviations = String::from("bus,region,scheduled,verified,deviation\n");
    for row in &report.deviations {
        let verified = row.verified.map(|v| v.to_string()).unwrap_or_default();
        let deviation = row.deviation.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            deviations,
            "{},{},{},{},{}",
            row.bus, row.region, row.scheduled, verified, deviation
        );
    }
    let deviations_path = dir.join("deviations.csv");
    fs::write(&deviations_path, deviations)?;
    written.push(deviations_path);

    if emit_traces {
        let mut out = String::from("phase,round,src,dst,t,var,value\n");
        for row in traces {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.phase, row.round, row.src, row.dst, row.t, row.var, row.value
            );
        }
        let traces_path = dir.join("traces.csv");
        fs::write(&traces_path, out)?;
        written.push(traces_path);
    }

    let ledger_dir = dir.join("ledgers");
    written.extend(ledgers.dump_dir(&ledger_dir)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::config::NoiseFile;

    fn sample_scenario() -> ScenarioFile {
        ScenarioFile {
            case_path: "cases/feeder141.m".into(),
            region_mapping_path: "cases/feeder141.regions".into(),
            measured_policy: Default::default(),
            noise: NoiseFile {
                family: "none".into(),
                variance: 0.0,
                seed: 0,
            },
            admm: Default::default(),
            detection: Default::default(),
            attack: None,
            schedule_override: None,
            max_restarts: None,
            stop_when_scores_settle: false,
            warm_restart: false,
            act_on_verdicts: true,
            output_dir: None,
        }
    }

    fn sample_report() -> RunReport {
        RunReport {
            outcome: RunOutcome::Converged,
            isolated: vec![],
            restarts: 0,
            phases: vec![PhaseReport {
                index: 0,
                regions: vec![1, 2],
                rounds: 3,
                outcome: PhaseOutcome::Converged,
                final_displacement: 1e-10,
                final_gap: 2e-10,
                verdict_margin: Some(-0.1),
                damped_rounds: 0,
                raced_convergence: false,
                diagnostics: vec![],
                pi_history: vec![PiRound {
                    round: 1,
                    scores: vec![0.5, 0.5],
                }],
                estimate: None,
            }],
            components_final: vec![vec![1, 2]],
            deviations: vec![DeviationRow {
                bus: 2,
                region: 1,
                scheduled: -0.1,
                verified: Some(-0.1000004),
                deviation: Some(4e-7),
            }],
            ledger_entries: 12,
            wall_clock_ms: 1.5,
            scenario: sample_scenario(),
        }
    }

    #[test]
    fn report_round_trips_through_json() {
        let report = sample_report();
        let text = report.to_json().unwrap();
        let back = RunReport::from_json(&text).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn exit_codes_follow_the_outcome() {
        assert_eq!(RunOutcome::Converged.exit_code(), 0);
        assert_eq!(RunOutcome::AttackerIsolated.exit_code(), 2);
        assert_eq!(RunOutcome::Exhausted.exit_code(), 3);
    }

    #[test]
    fn deviation_rows_sort_largest_first_with_gaps_last() {
        let mut rows = vec![
            DeviationRow {
                bus: 3,
                region: 1,
                scheduled: 0.0,
                verified: None,
                deviation: None,
            },
            DeviationRow {
                bus: 5,
                region: 2,
                scheduled: 0.0,
                verified: Some(0.1),
                deviation: Some(-0.1),
            },
            DeviationRow {
                bus: 4,
                region: 2,
                scheduled: 0.0,
                verified: Some(-0.3),
                deviation: Some(0.3),
            },
        ];
        rows.sort_by(|a, b| {
            let ka = a.deviation.map(f64::abs);
            let kb = b.deviation.map(f64::abs);
            match (ka, kb) {
                (Some(x), Some(y)) => y.partial_cmp(&x).unwrap().then(a.bus.cmp(&b.bus)),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => a.bus.cmp(&b.bus),
            }
        });
        let order: Vec<usize> = rows.iter().map(|r| r.bus).collect();
        assert_eq!(order, vec![4, 5, 3]);
    }

    #[test]
    fn emitted_files_land_in_the_output_dir() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample_report();
        let ledgers = LedgerSet::new(&[1, 2], &[(1, 2)]).unwrap();
        let traces = vec![TraceRow {
            phase: 0,
            round: 1,
            src: 1,
            dst: 2,
            t: 0,
            var: "p[2]".into(),
            value: -0.1,
        }];
        let written = emit_outputs(&report, &ledgers, &traces, dir.path(), true).unwrap();
        assert!(written.iter().any(|p| p.ends_with("report.json")));
        assert!(written.iter().any(|p| p.ends_with("traces.csv")));
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"GL.jsonl".to_string()));
        let body = fs::read_to_string(dir.path().join("deviations.csv")).unwrap();
        assert!(body.starts_with("bus,region,scheduled,verified,deviation\n"));
        assert!(body.contains("2,1,-0.1,"));
    }
}
