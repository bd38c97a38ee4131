//! Falsified-data injection into the exchange step.
//!
//! A compromised region keeps solving honestly but perturbs the boundary
//! state it sends. Perturbations are drawn from a ChaCha stream keyed by a
//! scenario seed together with the round, sender, receiver, and time, so a
//! run replays byte-for-byte under the same seed while every message still
//! gets a fresh direction.
//!
//! Besides the plain random-direction attack there is a crafted variant that
//! stays inside the null space of the sender's own constraint rows restricted
//! to the shared entries: the falsified values remain consistent with the
//! sender's physics and can only be noticed by comparing copies across
//! regions.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{l2_norm, null_space_basis, Matrix, NullSpace};
use crate::partition::RegionView;
use crate::scalar::Scalar;

/// What a compromised region does to its outgoing messages.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackStrategy<T> {
    /// Adds a fresh random direction of L2 norm `rho · √len` to every
    /// outgoing shared slice from `start_round` on.
    RandomState { rho: T, start_round: usize },
    /// Like `RandomState`, but the direction is confined to perturbations
    /// the sender's own constraint rows cannot see. Falls back to sending
    /// honestly when no such direction exists for a neighbor.
    Stealth { rho: T, start_round: usize },
}

/// A compromised region and its behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec<T> {
    pub attacker: usize,
    pub strategy: AttackStrategy<T>,
    /// Neighbors to tamper with; `None` targets every neighbor.
    pub targets: Option<Vec<usize>>,
    pub seed: u64,
}

impl<T: Scalar> AttackSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let (rho, start) = match &self.strategy {
            AttackStrategy::RandomState { rho, start_round }
            | AttackStrategy::Stealth { rho, start_round } => (*rho, *start_round),
        };
        if rho <= T::zero() {
            return Err(Error::Config("attack magnitude must be positive".into()));
        }
        if start == 0 {
            return Err(Error::Config(
                "attacks start at round 1 at the earliest".into(),
            ));
        }
        Ok(())
    }

    fn active(&self, round: usize, dst: usize) -> bool {
        let start = match &self.strategy {
            AttackStrategy::RandomState { start_round, .. }
            | AttackStrategy::Stealth { start_round, .. } => *start_round,
        };
        if round < start {
            return false;
        }
        match &self.targets {
            Some(list) => list.contains(&dst),
            None => true,
        }
    }
}

/// Deterministic per-message generator: one ChaCha stream per
/// (seed, label, round, sender, receiver, time) tuple.
pub fn message_rng(
    seed: u64,
    label: &str,
    round: usize,
    src: usize,
    dst: usize,
    t: usize,
) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update((round as u64).to_le_bytes());
    hasher.update((src as u64).to_le_bytes());
    hasher.update((dst as u64).to_le_bytes());
    hasher.update((t as u64).to_le_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

/// A unit-L2 direction of the given length. The degenerate draw where every
/// component rounds to zero falls back to the first coordinate axis.
pub fn random_direction<T: Scalar>(rng: &mut ChaCha20Rng, len: usize) -> Vec<T> {
    let mut v: Vec<T> = (0..len)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            T::from_f64(g)
        })
        .collect();
    let norm = l2_norm(&v);
    if norm <= T::from_f64(1e-300) {
        let mut axis = vec![T::zero(); len];
        if !axis.is_empty() {
            axis[0] = T::one();
        }
        return axis;
    }
    for x in &mut v {
        *x /= norm;
    }
    v
}

fn scaled_direction<T: Scalar>(rng: &mut ChaCha20Rng, len: usize, rho: T) -> Vec<T> {
    let magnitude = rho * T::from_f64(len as f64).sqrt();
    let mut v = random_direction::<T>(rng, len);
    for x in &mut v {
        *x *= magnitude;
    }
    v
}

/// Dense map from a perturbation of the shared slice with `neighbor` to the
/// change in this region's constraint residuals.
pub fn shared_constraint_map<T: Scalar>(
    view: &RegionView<T>,
    neighbor: usize,
) -> Result<Matrix<T>> {
    let shared = view.shared_with(neighbor)?;
    let h = view.constraints();
    let mut map = Matrix::zeros(h.rows(), shared.len());
    for row in 0..h.rows() {
        for (col, value) in h.row(row) {
            if let Ok(slot) = shared.binary_search(&col) {
                map.row_mut(row)[slot] += value;
            }
        }
    }
    Ok(map)
}

/// Directions in the shared slice with `neighbor` that the sender's own
/// constraint rows cannot distinguish from honest data.
pub fn stealth_feasibility<T: Scalar>(
    view: &RegionView<T>,
    neighbor: usize,
) -> Result<NullSpace<T>> {
    let map = shared_constraint_map(view, neighbor)?;
    Ok(null_space_basis(&map, T::from_f64(1e-10)))
}

/// Largest constraint-residual change the sender would see from adding `a`
/// to the shared slice with `neighbor`. A crafted attack keeps this at
/// numerical-noise level.
pub fn stealth_certificate<T: Scalar>(
    view: &RegionView<T>,
    neighbor: usize,
    a: &[T],
) -> Result<T> {
    let map = shared_constraint_map(view, neighbor)?;
    if a.len() != map.cols() {
        return Err(Error::Dimension {
            context: "stealth certificate vector",
            expected: map.cols(),
            got: a.len(),
        });
    }
    let residual = map.mul_vec(a);
    Ok(residual
        .iter()
        .fold(T::zero(), |acc, &r| acc.max(r.abs())))
}

/// Builds a constraint-invisible perturbation of L2 norm `rho · √len` for the
/// shared slice with `neighbor`, or `None` when the null space is empty or
/// the seeded combination degenerates.
pub fn craft_stealth_attack<T: Scalar>(
    view: &RegionView<T>,
    neighbor: usize,
    rho: T,
    rng: &mut ChaCha20Rng,
) -> Result<Option<Vec<T>>> {
    let basis = stealth_feasibility(view, neighbor)?;
    if basis.dim() == 0 {
        return Ok(None);
    }
    let shared_len = view.shared_with(neighbor)?.len();
    let coeffs: Vec<T> = (0..basis.dim())
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            T::from_f64(g)
        })
        .collect();
    let mut a = vec![T::zero(); shared_len];
    for (b, &c) in basis.basis.iter().zip(&coeffs) {
        for (slot, &value) in b.iter().enumerate() {
            a[slot] += c * value;
        }
    }
    let norm = l2_norm(&a);
    if norm <= T::from_f64(1e-300) {
        return Ok(None);
    }
    let scale = rho * T::from_f64(shared_len as f64).sqrt() / norm;
    for x in &mut a {
        *x *= scale;
    }
    Ok(Some(a))
}

/// Applies the spec to one outgoing message (all time slots), in place.
/// Returns the L2 norm of the perturbation added per time slot, empty when
/// the message went out honestly.
pub fn perturb_outgoing_state<T: Scalar>(
    spec: &AttackSpec<T>,
    view: &RegionView<T>,
    round: usize,
    dst: usize,
    horizon: &[usize],
    message: &mut [Vec<T>],
) -> Result<Vec<T>> {
    if view.id() != spec.attacker || !spec.active(round, dst) {
        return Ok(Vec::new());
    }
    if message.len() != horizon.len() {
        return Err(Error::Dimension {
            context: "message time slots",
            expected: horizon.len(),
            got: message.len(),
        });
    }
    let mut norms = Vec::with_capacity(horizon.len());
    for (slot, &t) in horizon.iter().enumerate() {
        let msg = &mut message[slot];
        let a = match &spec.strategy {
            AttackStrategy::RandomState { rho, .. } => {
                let mut rng = message_rng(spec.seed, "state-fdi", round, spec.attacker, dst, t);
                Some(scaled_direction(&mut rng, msg.len(), *rho))
            }
            AttackStrategy::Stealth { rho, .. } => {
                let mut rng =
                    message_rng(spec.seed, "stealth-fdi", round, spec.attacker, dst, t);
                craft_stealth_attack(view, dst, *rho, &mut rng)?
            }
        };
        match a {
            Some(a) => {
                for (m, d) in msg.iter_mut().zip(&a) {
                    *m += *d;
                }
                norms.push(l2_norm(&a));
            }
            None => norms.push(T::zero()),
        }
    }
    Ok(norms)
}

/// Adds a seeded random perturbation of L2 norm `rho · √len` to one region's
/// measurement vector, modeling falsified sensor readings rather than
/// falsified messages.
pub fn perturb_measurements<T: Scalar>(
    seed: u64,
    region: usize,
    t: usize,
    rho: T,
    values: &mut [T],
) {
    let mut rng = message_rng(seed, "meas-fdi", 0, region, region, t);
    let a = scaled_direction(&mut rng, values.len(), rho);
    for (v, d) in values.iter_mut().zip(&a) {
        *v += *d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_variable_space, parse_case, MeasuredPolicy};
    use crate::partition::{assign_regions, build_region_views};
    use approx::assert_relative_eq;

    const THREE_BUS: &str = "\
[buses]
1 1 0 0
2 0 -0.05 -0.02
3 0 -0.08 -0.03
[branches]
1 1 2 0.01 0.02
2 2 3 0.015 0.025
";

    fn split_views() -> Vec<RegionView<f64>> {
        let net = parse_case::<f64>(THREE_BUS).unwrap();
        let space = build_variable_space(&net, MeasuredPolicy::All).unwrap();
        let assignment = assign_regions(&net, &[(1, 1), (2, 1), (3, 2)].into()).unwrap();
        let (views, _) = build_region_views(&net, &space, &assignment).unwrap();
        views
    }

    #[test]
    fn direction_norm_is_exact() {
        let mut rng = message_rng(7, "state-fdi", 3, 1, 2, 0);
        let v = random_direction::<f64>(&mut rng, 10);
        assert_relative_eq!(l2_norm(&v), 1.0, epsilon = 1e-12);
        let s = scaled_direction::<f64>(&mut rng, 10, 0.5);
        assert_relative_eq!(l2_norm(&s), 0.5 * 10.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn same_key_replays_different_key_diverges() {
        let a = random_direction::<f64>(&mut message_rng(7, "state-fdi", 3, 1, 2, 0), 8);
        let b = random_direction::<f64>(&mut message_rng(7, "state-fdi", 3, 1, 2, 0), 8);
        assert_eq!(a, b);
        let c = random_direction::<f64>(&mut message_rng(7, "state-fdi", 4, 1, 2, 0), 8);
        assert_ne!(a, c);
        let d = random_direction::<f64>(&mut message_rng(8, "state-fdi", 3, 1, 2, 0), 8);
        assert_ne!(a, d);
    }

    #[test]
    fn inactive_rounds_and_untargeted_neighbors_pass_through() {
        let views = split_views();
        let spec = AttackSpec {
            attacker: 1,
            strategy: AttackStrategy::RandomState {
                rho: 0.5,
                start_round: 5,
            },
            targets: Some(vec![99]),
            seed: 7,
        };
        let shared_len = views[0].shared_with(2).unwrap().len();
        let mut msg = vec![vec![1.0; shared_len]];
        let norms = perturb_outgoing_state(&spec, &views[0], 4, 2, &[0], &mut msg).unwrap();
        assert!(norms.is_empty());
        assert!(msg[0].iter().all(|&v| v == 1.0));
        let norms = perturb_outgoing_state(&spec, &views[0], 6, 2, &[0], &mut msg).unwrap();
        assert!(norms.is_empty());
    }

    #[test]
    fn active_attack_changes_the_message_with_exact_norm() {
        let views = split_views();
        let spec = AttackSpec {
            attacker: 1,
            strategy: AttackStrategy::RandomState {
                rho: 0.5,
                start_round: 1,
            },
            targets: None,
            seed: 7,
        };
        let shared_len = views[0].shared_with(2).unwrap().len();
        let mut msg = vec![vec![0.0; shared_len]];
        let norms = perturb_outgoing_state(&spec, &views[0], 1, 2, &[0], &mut msg).unwrap();
        assert_eq!(norms.len(), 1);
        assert_relative_eq!(
            norms[0],
            0.5 * (shared_len as f64).sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            l2_norm(&msg[0]),
            0.5 * (shared_len as f64).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn stealth_attack_is_invisible_to_the_senders_constraints() {
        let views = split_views();
        let basis = stealth_feasibility(&views[0], 2).unwrap();
        assert!(basis.dim() > 0);
        let mut rng = message_rng(7, "stealth-fdi", 1, 1, 2, 0);
        let a = craft_stealth_attack(&views[0], 2, 0.5, &mut rng)
            .unwrap()
            .expect("null space is nonempty");
        let shared_len = views[0].shared_with(2).unwrap().len();
        assert_relative_eq!(
            l2_norm(&a),
            0.5 * (shared_len as f64).sqrt(),
            epsilon = 1e-12
        );
        let cert = stealth_certificate(&views[0], 2, &a).unwrap();
        assert!(cert < 1e-8, "certificate {cert:.3e}");
    }

    #[test]
    fn measurement_perturbation_has_exact_norm() {
        let mut values = vec![0.0_f64; 12];
        perturb_measurements(9, 3, 0, 0.25, &mut values);
        assert_relative_eq!(l2_norm(&values), 0.25 * 12.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad_rho = AttackSpec::<f64> {
            attacker: 1,
            strategy: AttackStrategy::RandomState {
                rho: 0.0,
                start_round: 1,
            },
            targets: None,
            seed: 0,
        };
        assert!(bad_rho.validate().is_err());
        let bad_start = AttackSpec::<f64> {
            attacker: 1,
            strategy: AttackStrategy::Stealth {
                rho: 0.5,
                start_round: 0,
            },
            targets: None,
            seed: 0,
        };
        assert!(bad_start.validate().is_err());
    }
}
