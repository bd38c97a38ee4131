use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::admm::{AdmmConfig, NoiseDescriptor};
use crate::adversary::{AttackSpec, AttackStrategy};
use crate::error::{Error, Result};
use crate::grid::MeasuredPolicy;
use crate::scalar::Scalar;
use crate::trust::TrustConfig;

/// On-disk scenario description; every numeric knob and seed is explicit so
/// a run is fully reproducible from this file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub case_path: String,
    pub region_mapping_path: String,
    #[serde(default)]
    pub measured_policy: MeasuredPolicyFile,
    pub noise: NoiseFile,
    #[serde(default)]
    pub admm: AdmmFile,
    #[serde(default)]
    pub detection: DetectionFile,
    #[serde(default)]
    pub attack: Option<AttackFile>,
    /// Per-bus scheduled active power overriding the case loads, keyed by
    /// bus id.
    #[serde(default)]
    pub schedule_override: Option<BTreeMap<usize, f64>>,
    /// Isolations allowed before the run gives up; defaults to the number of
    /// regions minus one.
    #[serde(default)]
    pub max_restarts: Option<usize>,
    /// Take a stable score vector alone as a termination signal, even
    /// without an attacker verdict.
    #[serde(default)]
    pub stop_when_scores_settle: bool,
    /// Keep surviving regions' iterates across an isolation instead of the
    /// default cold restart.
    #[serde(default)]
    pub warm_restart: bool,
    /// Isolate a region when the committee names it. Disable to observe
    /// only: verdicts are still recorded, but the loop runs to convergence
    /// or the iteration cap regardless of what detection finds.
    #[serde(default = "default_true")]
    pub act_on_verdicts: bool,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasuredPolicyFile {
    All,
    InjectionsOnly,
    Explicit(Vec<usize>),
}

impl Default for MeasuredPolicyFile {
    fn default() -> Self {
        MeasuredPolicyFile::All
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFile {
    /// "gaussian" or "none".
    pub family: String,
    #[serde(default)]
    pub variance: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmFile {
    pub c1: f64,
    pub c2: f64,
    pub epsilon: f64,
    pub k_max: usize,
    pub horizon: Vec<usize>,
    pub paper_literal_update: bool,
    pub canonical_dual_update: bool,
    pub ridge: Option<f64>,
}

impl Default for AdmmFile {
    fn default() -> Self {
        let d = AdmmConfig::<f64>::default();
        AdmmFile {
            c1: d.c1,
            c2: d.c2,
            epsilon: d.epsilon,
            k_max: d.k_max,
            horizon: d.horizon,
            paper_literal_update: d.paper_literal_update,
            canonical_dual_update: d.canonical_dual_update,
            ridge: d.ridge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionFile {
    pub epsilon_pi: f64,
    pub sigma_multiplier: f64,
    pub epsilon_norm: f64,
    pub stationary_tol: f64,
    pub stationary_max_iters: usize,
    pub damping: f64,
}

impl Default for DetectionFile {
    fn default() -> Self {
        let d = TrustConfig::<f64>::default();
        DetectionFile {
            epsilon_pi: d.epsilon_pi,
            sigma_multiplier: d.sigma_multiplier,
            epsilon_norm: d.epsilon_norm,
            stationary_tol: d.stationary_tol,
            stationary_max_iters: d.stationary_max_iters,
            damping: d.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackFile {
    pub attacker: usize,
    /// "random_state" or "stealth".
    pub kind: String,
    pub rho: f64,
    pub start_round: usize,
    #[serde(default)]
    pub targets: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<ScenarioFile> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read scenario {}: {e}", path.display()))
        })?;
        let file: ScenarioFile = serde_json::from_str(&text)?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Resolves relative case and mapping paths against the scenario file's
    /// own directory.
    pub fn resolve_paths(&mut self, scenario_path: &Path) {
        if let Some(dir) = scenario_path.parent() {
            for p in [&mut self.case_path, &mut self.region_mapping_path] {
                let candidate = PathBuf::from(&*p);
                if candidate.is_relative() {
                    *p = dir.join(candidate).to_string_lossy().into_owned();
                }
            }
        }
    }

    /// Converts into the typed configuration, validating every field.
    pub fn to_config<T: Scalar>(&self) -> Result<ScenarioConfig<T>> {
        let measured = match &self.measured_policy {
            MeasuredPolicyFile::All => MeasuredPolicy::All,
            MeasuredPolicyFile::InjectionsOnly => MeasuredPolicy::InjectionsOnly,
            MeasuredPolicyFile::Explicit(v) => MeasuredPolicy::Explicit(v.clone()),
        };
        let noise = match self.noise.family.as_str() {
            "none" => NoiseDescriptor::none(),
            "gaussian" => {
                if self.noise.variance < 0.0 {
                    return Err(Error::Config("noise variance must be nonnegative".into()));
                }
                NoiseDescriptor::gaussian(self.noise.variance, self.noise.seed)
            }
            other => {
                return Err(Error::Config(format!("unknown noise family `{other}`")))
            }
        };
        let admm = AdmmConfig {
            c1: T::from_f64(self.admm.c1),
            c2: T::from_f64(self.admm.c2),
            epsilon: T::from_f64(self.admm.epsilon),
            k_max: self.admm.k_max,
            horizon: self.admm.horizon.clone(),
            paper_literal_update: self.admm.paper_literal_update,
            canonical_dual_update: self.admm.canonical_dual_update,
            ridge: self.admm.ridge.map(T::from_f64),
        };
        admm.validate()?;
        let detection = TrustConfig {
            epsilon_pi: T::from_f64(self.detection.epsilon_pi),
            sigma_multiplier: T::from_f64(self.detection.sigma_multiplier),
            epsilon_norm: T::from_f64(self.detection.epsilon_norm),
            stationary_tol: T::from_f64(self.detection.stationary_tol),
            stationary_max_iters: self.detection.stationary_max_iters,
            damping: T::from_f64(self.detection.damping),
        };
        detection.validate()?;
        let attack = match &self.attack {
            None => None,
            Some(a) => {
                let strategy = match a.kind.as_str() {
                    "random_state" => AttackStrategy::RandomState {
                        rho: T::from_f64(a.rho),
                        start_round: a.start_round,
                    },
                    "stealth" => AttackStrategy::Stealth {
                        rho: T::from_f64(a.rho),
                        start_round: a.start_round,
                    },
                    other => {
                        return Err(Error::Config(format!("unknown attack kind `{other}`")))
                    }
                };
                let spec = AttackSpec {
                    attacker: a.attacker,
                    strategy,
                    targets: a.targets.clone(),
                    seed: a.seed,
                };
                spec.validate()?;
                Some(spec)
            }
        };
        Ok(ScenarioConfig {
            case_path: PathBuf::from(&self.case_path),
            region_mapping_path: PathBuf::from(&self.region_mapping_path),
            measured,
            noise,
            admm,
            detection,
            attack,
            schedule_override: self
                .schedule_override
                .as_ref()
                .map(|m| m.iter().map(|(&b, &p)| (b, T::from_f64(p))).collect()),
            max_restarts: self.max_restarts,
            stop_when_scores_settle: self.stop_when_scores_settle,
            warm_restart: self.warm_restart,
            act_on_verdicts: self.act_on_verdicts,
            output_dir: self.output_dir.as_ref().map(PathBuf::from),
            echo: self.clone(),
        })
    }
}

/// Fully validated runtime scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig<T> {
    pub case_path: PathBuf,
    pub region_mapping_path: PathBuf,
    pub measured: MeasuredPolicy,
    pub noise: NoiseDescriptor,
    pub admm: AdmmConfig<T>,
    pub detection: TrustConfig<T>,
    pub attack: Option<AttackSpec<T>>,
    pub schedule_override: Option<BTreeMap<usize, T>>,
    pub max_restarts: Option<usize>,
    pub stop_when_scores_settle: bool,
    pub warm_restart: bool,
    pub act_on_verdicts: bool,
    pub output_dir: Option<PathBuf>,
    /// The file this configuration came from, embedded in reports.
    pub echo: ScenarioFile,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "case_path": "cases/feeder141.m",
            "region_mapping_path": "cases/feeder141.regions",
            "noise": {"family": "gaussian", "variance": 1e-4, "seed": 7}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_fills_defaults() {
        let file: ScenarioFile = serde_json::from_str(&minimal_json()).unwrap();
        assert_eq!(file.admm.c1, 0.5);
        assert_eq!(file.admm.k_max, 500);
        assert_eq!(file.detection.sigma_multiplier, 2.0);
        assert!(file.act_on_verdicts);
        assert!(file.attack.is_none());
        let config: ScenarioConfig<f64> = file.to_config().unwrap();
        assert_eq!(config.noise.variance, 1e-4);
        assert!(config.attack.is_none());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = minimal_json().replace("\"noise\"", "\"typo_field\": 1, \"noise\"");
        assert!(serde_json::from_str::<ScenarioFile>(&bad).is_err());
    }

    #[test]
    fn bad_attack_kind_is_rejected() {
        let mut file: ScenarioFile = serde_json::from_str(&minimal_json()).unwrap();
        file.attack = Some(AttackFile {
            attacker: 1,
            kind: "replay".into(),
            rho: 0.5,
            start_round: 1,
            targets: None,
            seed: 0,
        });
        assert!(file.to_config::<f64>().is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let mut file: ScenarioFile = serde_json::from_str(&minimal_json()).unwrap();
        file.attack = Some(AttackFile {
            attacker: 3,
            kind: "random_state".into(),
            rho: 0.5,
            start_round: 2,
            targets: Some(vec![2, 4]),
            seed: 11,
        });
        let text = serde_json::to_string(&file).unwrap();
        let back: ScenarioFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
    }
}
