use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{inf_norm_diff, Matrix};
use crate::partition::CommunicationGraph;
use crate::scalar::Scalar;

/// Tuning knobs for disagreement tracking and the random-walk score.
#[derive(Debug, Clone)]
pub struct TrustConfig<T> {
    /// Stability tolerance on successive score vectors before a verdict may
    /// be issued.
    pub epsilon_pi: T,
    /// How many excluded-population standard deviations above the mean a
    /// score must sit to mark its region.
    pub sigma_multiplier: T,
    /// Row sums at or below this are treated as no signal and replaced by a
    /// uniform step over the row's neighbors.
    pub epsilon_norm: T,
    /// Power-iteration tolerance for the stationary distribution.
    pub stationary_tol: T,
    /// Power-iteration cap before the damped retry.
    pub stationary_max_iters: usize,
    /// Mixing weight toward the original matrix in the damped retry; the
    /// remainder spreads uniformly and breaks periodic chains.
    pub damping: T,
}

impl<T: Scalar> Default for TrustConfig<T> {
    fn default() -> Self {
        TrustConfig {
            epsilon_pi: T::from_f64(1e-3),
            sigma_multiplier: T::from_f64(2.0),
            epsilon_norm: T::from_f64(1e-9),
            stationary_tol: T::from_f64(1e-12),
            stationary_max_iters: 100_000,
            damping: T::from_f64(0.99),
        }
    }
}

impl<T: Scalar> TrustConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon_pi <= T::zero() {
            return Err(Error::Config("epsilon_pi must be positive".into()));
        }
        if self.sigma_multiplier < T::zero() {
            return Err(Error::Config("sigma_multiplier must be nonnegative".into()));
        }
        if self.damping <= T::zero() || self.damping >= T::one() {
            return Err(Error::Config("damping must lie strictly in (0, 1)".into()));
        }
        if self.stationary_max_iters == 0 {
            return Err(Error::Config("stationary_max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// One observer's view of one neighbor for one round: the squared L2 gap
/// between the observer's own shared entries and the copy that neighbor sent,
/// summed over the horizon.
#[derive(Debug, Clone, Copy)]
pub struct DisagreementSample<T> {
    pub observer: usize,
    pub about: usize,
    pub sum_sq: T,
    pub shared_len: usize,
    pub time_slots: usize,
}

/// Exponentially averaged disagreement scores and the stationary score
/// vector derived from them.
///
/// The averaging weight is `1/k` in round `k`, so the first round overwrites
/// any prior value and later rounds blend with progressively longer memory.
#[derive(Debug, Clone)]
pub struct TrustState<T> {
    regions: Vec<usize>,
    rounds: usize,
    d: BTreeMap<(usize, usize), T>,
    pi: Vec<T>,
    pi_prev: Vec<T>,
    pi_rounds: usize,
    damped_last: bool,
}

impl<T: Scalar> TrustState<T> {
    /// Starts with zero disagreement everywhere and no score history.
    pub fn new(regions: &[usize]) -> Result<Self> {
        let mut sorted = regions.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != regions.len() {
            return Err(Error::Config("duplicate region ids".into()));
        }
        if sorted.is_empty() {
            return Err(Error::Config("at least one region is required".into()));
        }
        let n = sorted.len();
        Ok(TrustState {
            regions: sorted,
            rounds: 0,
            d: BTreeMap::new(),
            pi: vec![T::zero(); n],
            pi_prev: vec![T::zero(); n],
            pi_rounds: 0,
            damped_last: false,
        })
    }

    pub fn region_ids(&self) -> &[usize] {
        &self.regions
    }

    /// Rounds of disagreement data absorbed so far.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Current disagreement score of `observer` about `about` (zero if never
    /// sampled).
    pub fn disagreement(&self, observer: usize, about: usize) -> T {
        self.d
            .get(&(observer, about))
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Latest stationary score vector, aligned with `region_ids`.
    pub fn scores(&self) -> &[T] {
        &self.pi
    }

    /// How many stationary vectors have been computed.
    pub fn score_rounds(&self) -> usize {
        self.pi_rounds
    }

    /// Whether the latest stationary solve needed the damped retry.
    pub fn damped(&self) -> bool {
        self.damped_last
    }

    /// Change between the latest two score vectors, infinity norm.
    pub fn score_displacement(&self) -> T {
        inf_norm_diff(&self.pi, &self.pi_prev)
    }

    fn index_of(&self, region: usize) -> Result<usize> {
        self.regions
            .binary_search(&region)
            .map_err(|_| Error::Config(format!("unknown region {region}")))
    }

    /// Absorbs one full round of pairwise disagreement. Every communicating
    /// pair must be sampled each round; pairs absent from `samples` keep
    /// their previous score unchanged, which is only correct when no message
    /// flowed between them.
    pub fn record_round(&mut self, samples: &[DisagreementSample<T>]) -> Result<()> {
        for s in samples {
            self.index_of(s.observer)?;
            self.index_of(s.about)?;
            if s.observer == s.about {
                return Err(Error::Config(
                    "a region cannot sample disagreement about itself".into(),
                ));
            }
            if s.shared_len == 0 || s.time_slots == 0 {
                return Err(Error::Config(
                    "disagreement sample over an empty overlap".into(),
                ));
            }
            if s.sum_sq < T::zero() || !s.sum_sq.is_finite() {
                return Err(Error::Config(
                    "disagreement sample must be finite and nonnegative".into(),
                ));
            }
        }
        self.rounds += 1;
        let alpha = T::one() / T::from_f64(self.rounds as f64);
        let quarter = T::from_f64(0.25);
        for s in samples {
            let denom = T::from_f64((s.shared_len * s.time_slots) as f64);
            let contrib = quarter * s.sum_sq / denom;
            let entry = self
                .d
                .entry((s.observer, s.about))
                .or_insert_with(T::zero);
            *entry = (T::one() - alpha) * *entry + alpha * contrib;
        }
        Ok(())
    }

    /// Builds the row-stochastic walk matrix in `region_ids` order. Rows with
    /// no accumulated signal step uniformly over their graph neighbors; a row
    /// with no neighbors at all holds in place.
    pub fn build_trust_matrix(
        &self,
        graph: &CommunicationGraph,
        config: &TrustConfig<T>,
    ) -> Result<Matrix<T>> {
        let n = self.regions.len();
        let mut b = Matrix::zeros(n, n);
        for (i, &ri) in self.regions.iter().enumerate() {
            if !graph.contains(ri) {
                return Err(Error::Config(format!(
                    "region {ri} is not in the communication graph"
                )));
            }
            let neighbors: Vec<usize> = graph.neighbors(ri).collect();
            let mut row_sum = T::zero();
            for &rj in &neighbors {
                row_sum += self.disagreement(ri, rj);
            }
            if neighbors.is_empty() {
                b.row_mut(i)[i] = T::one();
            } else if row_sum <= config.epsilon_norm {
                let w = T::one() / T::from_f64(neighbors.len() as f64);
                for &rj in &neighbors {
                    let j = self.index_of(rj)?;
                    b.row_mut(i)[j] = w;
                }
            } else {
                let mut total = T::zero();
                for &rj in &neighbors {
                    let j = self.index_of(rj)?;
                    let w = self.disagreement(ri, rj) / row_sum;
                    b.row_mut(i)[j] = w;
                    total += w;
                }
                for &rj in &neighbors {
                    let j = self.index_of(rj)?;
                    b.row_mut(i)[j] /= total;
                }
            }
        }
        Ok(b)
    }

    /// Recomputes the stationary score vector from the current disagreement
    /// scores and pushes the previous vector into the one-step history.
    pub fn update_scores(
        &mut self,
        graph: &CommunicationGraph,
        config: &TrustConfig<T>,
    ) -> Result<()> {
        config.validate()?;
        let b = self.build_trust_matrix(graph, config)?;
        let (pi, damped) = stationary_distribution(&b, config)?;
        self.pi_prev = std::mem::replace(&mut self.pi, pi);
        self.pi_rounds += 1;
        self.damped_last = damped;
        Ok(())
    }
}

fn power_iterate<T: Scalar>(
    b: &Matrix<T>,
    tol: T,
    max_iters: usize,
) -> Option<Vec<T>> {
    let n = b.rows();
    let mut pi = vec![T::one() / T::from_f64(n as f64); n];
    for _ in 0..max_iters {
        let mut next = b.transpose_mul_vec(&pi);
        let total: T = next.iter().copied().sum();
        if total <= T::zero() || !total.is_finite() {
            return None;
        }
        for v in &mut next {
            *v /= total;
        }
        let moved = inf_norm_diff(&next, &pi);
        pi = next;
        if moved <= tol {
            return Some(pi);
        }
    }
    None
}

/// Stationary distribution of a row-stochastic matrix by power iteration.
/// Periodic chains (for example two regions pointing only at each other) make
/// the plain iteration oscillate; those are rerun on a damped copy that mixes
/// a little uniform mass into every step. The boolean reports whether the
/// damped retry was needed.
pub fn stationary_distribution<T: Scalar>(
    b: &Matrix<T>,
    config: &TrustConfig<T>,
) -> Result<(Vec<T>, bool)> {
    let n = b.rows();
    if n == 0 || b.cols() != n {
        return Err(Error::Dimension {
            context: "stationary distribution input",
            expected: n,
            got: b.cols(),
        });
    }
    if n == 1 {
        return Ok((vec![T::one()], false));
    }
    if let Some(pi) = power_iterate(b, config.stationary_tol, config.stationary_max_iters) {
        return Ok((pi, false));
    }
    let uniform = (T::one() - config.damping) / T::from_f64(n as f64);
    let mut damped = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            damped.row_mut(i)[j] = config.damping * b.row(i)[j] + uniform;
        }
    }
    power_iterate(&damped, config.stationary_tol, config.stationary_max_iters)
        .map(|pi| (pi, true))
        .ok_or_else(|| {
            Error::NoConvergence("stationary distribution did not settle".into())
        })
}
