use rand_distr::{Distribution, StandardNormal};

use crate::admm::MeasurementSet;
use crate::adversary::message_rng;
use crate::error::{Error, Result};
use crate::grid::{solve_power_flow, GridNetwork, SystemVariableSpace};
use crate::orchestrator::config::ScenarioConfig;
use crate::partition::RegionView;
use crate::scalar::Scalar;

/// Ground truth, schedule, and the sensor readings handed to the regions.
#[derive(Debug, Clone)]
pub struct ScenarioData<T> {
    /// Stacked true system state, one vector per horizon slot. Kept for
    /// reporting only; regions never see it.
    pub truth_per_t: Vec<Vec<T>>,
    /// Scheduled active injection per bus id (substation excluded).
    pub schedule: Vec<(usize, T)>,
    /// Per-region noisy sensor readings.
    pub measurements: MeasurementSet<T>,
}

/// Applies the scenario's schedule override to the network loads.
pub fn apply_schedule_override<T: Scalar>(
    net: &mut GridNetwork<T>,
    config: &ScenarioConfig<T>,
) -> Result<()> {
    if let Some(overrides) = &config.schedule_override {
        for (&bus, &p) in overrides {
            net.set_scheduled_p(bus, p)?;
        }
    }
    Ok(())
}

/// Solves the power flow at the scheduled injections, slices each region's
/// measured variables out of the true state, and perturbs every reading with
/// seeded Gaussian noise of the configured variance. Each region draws its
/// own noise, so two regions measuring the same boundary variable disagree
/// by noise even before any attack.
pub fn generate_scenario_data<T: Scalar>(
    net: &GridNetwork<T>,
    space: &SystemVariableSpace,
    views: &[RegionView<T>],
    config: &ScenarioConfig<T>,
) -> Result<ScenarioData<T>> {
    let solution = solve_power_flow(net)?;
    let truth = space.stack(&solution);
    let truth_per_t: Vec<Vec<T>> = config.admm.horizon.iter().map(|_| truth.clone()).collect();

    let schedule: Vec<(usize, T)> = net
        .buses()
        .iter()
        .filter(|b| b.id != net.substation())
        .map(|b| (b.id, b.scheduled_p))
        .collect();

    let mut measurements =
        MeasurementSet::from_global(views, &config.admm.horizon, &truth_per_t, config.noise.clone())?;
    match config.noise.family.as_str() {
        "none" => {}
        "gaussian" => {
            let sigma = T::from_f64(config.noise.variance.sqrt());
            for view in views {
                for &t in &config.admm.horizon {
                    let mut rng =
                        message_rng(config.noise.seed, "sensor-noise", 0, view.id(), view.id(), t);
                    let values = measurements.get_mut(view.id(), t)?;
                    for v in values.iter_mut() {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        *v += sigma * T::from_f64(g);
                    }
                }
            }
        }
        other => {
            return Err(Error::Config(format!("unknown noise family `{other}`")));
        }
    }
    measurements.validate_against(views)?;
    Ok(ScenarioData {
        truth_per_t,
        schedule,
        measurements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::NoiseDescriptor;
    use crate::grid::{build_variable_space, parse_case, MeasuredPolicy};
    use crate::orchestrator::config::ScenarioFile;
    use crate::partition::{assign_regions, build_region_views};

    const THREE_BUS: &str = "\
[buses]
1 1 0 0
2 0 -0.05 -0.02
3 0 -0.08 -0.03
[branches]
1 1 2 0.01 0.02
2 2 3 0.015 0.025
";

    fn scenario(noise: &str, variance: f64, seed: u64) -> ScenarioConfig<f64> {
        let json = format!(
            r#"{{
                "case_path": "unused",
                "region_mapping_path": "unused",
                "noise": {{"family": "{noise}", "variance": {variance}, "seed": {seed}}}
            }}"#
        );
        let file: ScenarioFile = serde_json::from_str(&json).unwrap();
        file.to_config().unwrap()
    }

    fn setup() -> (
        GridNetwork<f64>,
        SystemVariableSpace,
        Vec<RegionView<f64>>,
    ) {
        let net = parse_case::<f64>(THREE_BUS).unwrap();
        let space = build_variable_space(&net, MeasuredPolicy::All).unwrap();
        let assignment = assign_regions(&net, &[(1, 1), (2, 1), (3, 2)].into()).unwrap();
        let (views, _) = build_region_views(&net, &space, &assignment).unwrap();
        (net, space, views)
    }

    #[test]
    fn zero_noise_measurements_equal_the_truth_slice() {
        let (net, space, views) = setup();
        let config = scenario("none", 0.0, 0);
        let data = generate_scenario_data(&net, &space, &views, &config).unwrap();
        assert_eq!(data.measurements.noise(), &NoiseDescriptor::none());
        for v in &views {
            let s = data.measurements.get(v.id(), 0).unwrap();
            for (row, &k) in v.measured_local().iter().enumerate() {
                assert_eq!(s[row], data.truth_per_t[0][v.global_index(k)]);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_noise_exactly() {
        let (net, space, views) = setup();
        let config = scenario("gaussian", 1e-4, 7);
        let a = generate_scenario_data(&net, &space, &views, &config).unwrap();
        let b = generate_scenario_data(&net, &space, &views, &config).unwrap();
        for v in &views {
            assert_eq!(
                a.measurements.get(v.id(), 0).unwrap(),
                b.measurements.get(v.id(), 0).unwrap()
            );
        }
        let other = scenario("gaussian", 1e-4, 8);
        let c = generate_scenario_data(&net, &space, &views, &other).unwrap();
        assert_ne!(
            a.measurements.get(1, 0).unwrap(),
            c.measurements.get(1, 0).unwrap()
        );
    }

    #[test]
    fn regions_draw_independent_noise_on_shared_variables() {
        let (net, space, views) = setup();
        let config = scenario("gaussian", 1e-4, 7);
        let data = generate_scenario_data(&net, &space, &views, &config).unwrap();
        let shared_globals = views[0].shared_globals(2).unwrap();
        let g = shared_globals[0];
        let k1 = views[0].local_index(g).unwrap();
        let k2 = views[1].local_index(g).unwrap();
        let row1 = views[0].measured_local().iter().position(|&k| k == k1).unwrap();
        let row2 = views[1].measured_local().iter().position(|&k| k == k2).unwrap();
        let s1 = data.measurements.get(1, 0).unwrap()[row1];
        let s2 = data.measurements.get(2, 0).unwrap()[row2];
        assert_ne!(s1, s2);
        assert!((s1 - s2).abs() < 0.1);
    }

    #[test]
    fn schedule_lists_every_load_bus() {
        let (net, space, views) = setup();
        let config = scenario("none", 0.0, 0);
        let data = generate_scenario_data(&net, &space, &views, &config).unwrap();
        assert_eq!(data.schedule, vec![(2, -0.05), (3, -0.08)]);
    }
}
