use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::partition::RegionView;
use crate::scalar::Scalar;

/// Tuning knobs for the consensus iteration.
#[derive(Debug, Clone)]
pub struct AdmmConfig<T> {
    /// Weight on the schedule-tracking term.
    pub c1: T,
    /// Consensus penalty weight; must be positive.
    pub c2: T,
    /// Convergence tolerance on the ∞-norm displacement and consensus gap.
    pub epsilon: T,
    /// Iteration cap.
    pub k_max: usize,
    /// Time indices verified jointly.
    pub horizon: Vec<usize>,
    /// Drop the c1 weighting from the x-update (matrix and right-hand side),
    /// reproducing the printed update instead of the objective's minimizer.
    pub paper_literal_update: bool,
    /// Replace the dual recursion with `υ += ψ_new − x_new` for comparison.
    pub canonical_dual_update: bool,
    /// Optional diagonal regularization added to the x-update system.
    pub ridge: Option<T>,
}

impl<T: Scalar> Default for AdmmConfig<T> {
    fn default() -> Self {
        AdmmConfig {
            c1: T::from_f64(0.5),
            c2: T::from_f64(0.5),
            epsilon: T::from_f64(1e-3),
            k_max: 500,
            horizon: vec![0],
            paper_literal_update: false,
            canonical_dual_update: false,
            ridge: None,
        }
    }
}

impl<T: Scalar> AdmmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.c1 < T::zero() {
            return Err(Error::Config("c1 must be nonnegative".into()));
        }
        if self.c2 <= T::zero() {
            return Err(Error::Config("c2 must be positive".into()));
        }
        if self.epsilon <= T::zero() {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.horizon.is_empty() {
            return Err(Error::Config("horizon must contain at least one time".into()));
        }
        if let Some(r) = self.ridge {
            if r < T::zero() {
                return Err(Error::Config("ridge must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// How measurement noise was produced, for reporting and reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDescriptor {
    /// Distribution family; the generator only produces "gaussian" or "none".
    pub family: String,
    pub variance: f64,
    pub seed: u64,
}

impl NoiseDescriptor {
    pub fn none() -> Self {
        NoiseDescriptor {
            family: "none".into(),
            variance: 0.0,
            seed: 0,
        }
    }

    pub fn gaussian(variance: f64, seed: u64) -> Self {
        NoiseDescriptor {
            family: "gaussian".into(),
            variance,
            seed,
        }
    }
}

/// Per-region, per-time sensor readings over each region's measured subset.
#[derive(Debug, Clone)]
pub struct MeasurementSet<T> {
    horizon: Vec<usize>,
    values: BTreeMap<(usize, usize), Vec<T>>,
    noise: NoiseDescriptor,
}

impl<T: Scalar> MeasurementSet<T> {
    pub fn new(horizon: Vec<usize>, noise: NoiseDescriptor) -> Self {
        MeasurementSet {
            horizon,
            values: BTreeMap::new(),
            noise,
        }
    }

    /// Slices one global vector per time into consistent per-region copies.
    pub fn from_global(
        views: &[RegionView<T>],
        horizon: &[usize],
        global_per_t: &[Vec<T>],
        noise: NoiseDescriptor,
    ) -> Result<Self> {
        if horizon.len() != global_per_t.len() {
            return Err(Error::Dimension {
                context: "global measurement vectors vs horizon",
                expected: horizon.len(),
                got: global_per_t.len(),
            });
        }
        let mut set = MeasurementSet::new(horizon.to_vec(), noise);
        for (slot, &t) in horizon.iter().enumerate() {
            let global = &global_per_t[slot];
            for v in views {
                let s: Vec<T> = v
                    .measured_local()
                    .iter()
                    .map(|&k| global[v.global_index(k)])
                    .collect();
                set.insert(v.id(), t, s)?;
            }
        }
        Ok(set)
    }

    pub fn insert(&mut self, region: usize, t: usize, values: Vec<T>) -> Result<()> {
        if !self.horizon.contains(&t) {
            return Err(Error::Config(format!("time {t} is not in the horizon")));
        }
        self.values.insert((region, t), values);
        Ok(())
    }

    pub fn get(&self, region: usize, t: usize) -> Result<&[T]> {
        self.values
            .get(&(region, t))
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::Config(format!("no measurements for region {region} at t={t}"))
            })
    }

    pub fn get_mut(&mut self, region: usize, t: usize) -> Result<&mut Vec<T>> {
        self.values.get_mut(&(region, t)).ok_or_else(|| {
            Error::Config(format!("no measurements for region {region} at t={t}"))
        })
    }

    pub fn horizon(&self) -> &[usize] {
        &self.horizon
    }

    pub fn noise(&self) -> &NoiseDescriptor {
        &self.noise
    }

    /// Checks that every (region, t) slot is present with the right length.
    pub fn validate_against(&self, views: &[RegionView<T>]) -> Result<()> {
        for v in views {
            for &t in &self.horizon {
                let s = self.get(v.id(), t)?;
                if s.len() != v.measured_local().len() {
                    return Err(Error::Dimension {
                        context: "measurement vector for region",
                        expected: v.measured_local().len(),
                        got: s.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = AdmmConfig::<f64>::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.c1, 0.5);
        assert_eq!(cfg.c2, 0.5);
        assert_eq!(cfg.epsilon, 1e-3);
        assert_eq!(cfg.k_max, 500);
        assert_eq!(cfg.horizon, vec![0]);
        assert!(!cfg.paper_literal_update);
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = AdmmConfig::<f64>::default();
        cfg.c2 = 0.0;
        assert!(cfg.validate().is_err());
        cfg = AdmmConfig::default();
        cfg.horizon.clear();
        assert!(cfg.validate().is_err());
        cfg = AdmmConfig::default();
        cfg.ridge = Some(-1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn measurement_set_round_trips() {
        let mut set = MeasurementSet::<f64>::new(vec![0, 1], NoiseDescriptor::none());
        set.insert(1, 0, vec![1.0, 2.0]).unwrap();
        assert_eq!(set.get(1, 0).unwrap(), &[1.0, 2.0]);
        assert!(set.get(1, 1).is_err());
        assert!(set.insert(1, 5, vec![]).is_err());
    }
}
