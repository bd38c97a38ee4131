use std::collections::BTreeMap;

use crate::admm::config::{AdmmConfig, MeasurementSet};
use crate::admm::state::AdmmState;
use crate::error::{Error, Result};
use crate::linalg::{null_space_basis, Cholesky, Matrix};
use crate::partition::RegionView;
use crate::scalar::Scalar;

/// A single estimate of the system state over some subset of the global
/// variables, one value vector per time slot.
#[derive(Debug, Clone)]
pub struct GlobalEstimate<T> {
    support: Vec<usize>,
    per_t: Vec<Vec<T>>,
}

impl<T: Scalar> GlobalEstimate<T> {
    /// Sorted global variable indices the estimate covers.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn time_slots(&self) -> usize {
        self.per_t.len()
    }

    /// Values for one time slot, aligned with `support`.
    pub fn values(&self, t_slot: usize) -> &[T] {
        &self.per_t[t_slot]
    }

    /// Value of one global variable at one time slot, if covered.
    pub fn get(&self, t_slot: usize, global: usize) -> Option<T> {
        self.support
            .binary_search(&global)
            .ok()
            .map(|pos| self.per_t[t_slot][pos])
    }

    /// Largest entry-wise difference to another estimate over all time slots.
    /// Both estimates must cover the same support.
    pub fn max_abs_difference(&self, other: &Self) -> Result<T> {
        if self.support != other.support {
            return Err(Error::Dimension {
                context: "estimate support comparison",
                expected: self.support.len(),
                got: other.support.len(),
            });
        }
        if self.per_t.len() != other.per_t.len() {
            return Err(Error::Dimension {
                context: "estimate time slots",
                expected: self.per_t.len(),
                got: other.per_t.len(),
            });
        }
        let mut worst = T::zero();
        for (a, b) in self.per_t.iter().zip(&other.per_t) {
            for (&x, &y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }

    /// Largest entry-wise difference to a full global vector per time slot,
    /// evaluated only on the supported entries.
    pub fn max_abs_error(&self, reference_per_t: &[Vec<T>]) -> Result<T> {
        if reference_per_t.len() != self.per_t.len() {
            return Err(Error::Dimension {
                context: "reference time slots",
                expected: self.per_t.len(),
                got: reference_per_t.len(),
            });
        }
        let mut worst = T::zero();
        for (vals, reference) in self.per_t.iter().zip(reference_per_t) {
            for (pos, &g) in self.support.iter().enumerate() {
                if g >= reference.len() {
                    return Err(Error::Dimension {
                        context: "reference vector length",
                        expected: g + 1,
                        got: reference.len(),
                    });
                }
                worst = worst.max((vals[pos] - reference[g]).abs());
            }
        }
        Ok(worst)
    }
}

/// Averages the regional copies of every variable into one estimate. Each
/// variable is covered by at least one region; replicated boundary variables
/// are averaged across their holders.
pub fn stitch<T: Scalar>(
    views: &[RegionView<T>],
    states: &[AdmmState<T>],
) -> Result<GlobalEstimate<T>> {
    if views.len() != states.len() {
        return Err(Error::Dimension {
            context: "views vs states",
            expected: views.len(),
            got: states.len(),
        });
    }
    if views.is_empty() {
        return Err(Error::Config("cannot stitch zero regions".into()));
    }
    let slots = states[0].time_slots();
    let mut acc: BTreeMap<usize, (Vec<T>, usize)> = BTreeMap::new();
    for (view, state) in views.iter().zip(states) {
        if state.time_slots() != slots {
            return Err(Error::Dimension {
                context: "time slots across regions",
                expected: slots,
                got: state.time_slots(),
            });
        }
        for (k, &g) in view.local_variables().iter().enumerate() {
            let entry = acc
                .entry(g)
                .or_insert_with(|| (vec![T::zero(); slots], 0));
            for t in 0..slots {
                entry.0[t] += state.x(t)[k];
            }
            entry.1 += 1;
        }
    }
    let support: Vec<usize> = acc.keys().copied().collect();
    let mut per_t = vec![Vec::with_capacity(support.len()); slots];
    for (&_g, (sums, count)) in &acc {
        let inv = T::one() / T::from_f64(*count as f64);
        for t in 0..slots {
            per_t[t].push(sums[t] * inv);
        }
    }
    Ok(GlobalEstimate { support, per_t })
}

/// Solves the pooled least-squares problem the consensus iteration targets:
/// one shared copy of every variable, with each region contributing its
/// constraint rows, measurements, and schedule terms. Boundary variables
/// that several regions hold contribute one term per holder, matching the
/// sum of regional objectives.
///
/// Works on any subset of regions, e.g. the survivors after an isolation;
/// the support is then the union of the given regions' variables.
pub fn solve_centralized<T: Scalar>(
    views: &[RegionView<T>],
    measurements: &MeasurementSet<T>,
    config: &AdmmConfig<T>,
) -> Result<GlobalEstimate<T>> {
    config.validate()?;
    if views.is_empty() {
        return Err(Error::Config("cannot solve over zero regions".into()));
    }
    let mut support: Vec<usize> = Vec::new();
    for view in views {
        support.extend_from_slice(view.local_variables());
    }
    support.sort_unstable();
    support.dedup();
    let n = support.len();
    let pos_of = |g: usize| support.binary_search(&g).expect("support covers locals");

    let sched_w = if config.paper_literal_update {
        T::one()
    } else {
        config.c1
    };
    let mut a = Matrix::zeros(n, n);
    for view in views {
        let map: Vec<usize> = view
            .local_variables()
            .iter()
            .map(|&g| pos_of(g))
            .collect();
        for row in 0..view.constraints().rows() {
            let entries: Vec<(usize, T)> = view.constraints().row(row).collect();
            for &(ci, vi) in &entries {
                for &(cj, vj) in &entries {
                    a.row_mut(map[ci])[map[cj]] += vi * vj;
                }
            }
        }
        for &k in view.measured_local() {
            a.row_mut(map[k])[map[k]] += T::one();
        }
        for &k in view.scheduled_local() {
            a.row_mut(map[k])[map[k]] += sched_w;
        }
    }
    if let Some(r) = config.ridge {
        for k in 0..n {
            a.row_mut(k)[k] += r;
        }
    }

    let factor = Cholesky::factor(&a).map_err(|_| {
        let null_dim = null_space_basis(&a, T::from_f64(1e-10)).dim();
        Error::Linalg(format!(
            "pooled system over {} regions is singular; {} unobservable direction(s)",
            views.len(),
            null_dim
        ))
    })?;

    let mut per_t = Vec::with_capacity(config.horizon.len());
    for &t in &config.horizon {
        let mut rhs = vec![T::zero(); n];
        for view in views {
            let s = measurements.get(view.id(), t)?;
            if s.len() != view.measured_local().len() {
                return Err(Error::Dimension {
                    context: "measurement slice in pooled solve",
                    expected: view.measured_local().len(),
                    got: s.len(),
                });
            }
            for (row, &k) in view.measured_local().iter().enumerate() {
                rhs[pos_of(view.global_index(k))] += s[row];
            }
            for (row, &k) in view.scheduled_local().iter().enumerate() {
                rhs[pos_of(view.global_index(k))] += sched_w * view.schedule()[row];
            }
        }
        per_t.push(factor.solve(&rhs));
    }
    Ok(GlobalEstimate { support, per_t })
}
