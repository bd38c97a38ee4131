use crate::scalar::Scalar;
use crate::trust::scores::{TrustConfig, TrustState};

/// Outcome of one verdict check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The score vector has not stabilized yet; keep iterating.
    NotReady,
    /// Scores are stable and no region stands out.
    NoAttacker,
    /// Scores are stable and this region stands out above its threshold.
    Attacker(usize),
}

/// A verdict plus the evidence behind it.
#[derive(Debug, Clone)]
pub struct VerdictOutcome<T> {
    pub verdict: Verdict,
    /// How far the most suspicious region sits above its threshold (negative
    /// when nobody crosses it). Present once the scores are stable.
    pub margin: Option<T>,
    /// Whether the underlying stationary solve needed the damped retry.
    pub damped: bool,
}

/// Position of the largest score; an exact tie resolves to the earliest
/// position, which is the lowest region id in the sorted id order.
fn argmax_first<T: Scalar>(scores: &[T]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Mean and population standard deviation of all scores except `exclude`.
pub fn excluded_stats<T: Scalar>(scores: &[T], exclude: usize) -> (T, T) {
    let n = scores.len();
    if n <= 1 {
        return (T::zero(), T::zero());
    }
    let count = T::from_f64((n - 1) as f64);
    let mut mean = T::zero();
    for (j, &s) in scores.iter().enumerate() {
        if j != exclude {
            mean += s;
        }
    }
    mean /= count;
    let mut var = T::zero();
    for (j, &s) in scores.iter().enumerate() {
        if j != exclude {
            let diff = s - mean;
            var += diff * diff;
        }
    }
    (mean, (var / count).sqrt())
}

/// Tests the stabilized score vector against the outlier threshold.
///
/// Each region is compared with the mean plus `sigma_multiplier` standard
/// deviations of the other regions' scores. If any region exceeds its
/// threshold strictly, the region with the largest score is named (lowest id
/// wins a tie); otherwise the round is declared clean. Before the scores have
/// settled twice in a row within `epsilon_pi`, no verdict is issued.
pub fn check_verdict<T: Scalar>(
    state: &TrustState<T>,
    config: &TrustConfig<T>,
) -> VerdictOutcome<T> {
    if state.score_rounds() < 2 || state.score_displacement() > config.epsilon_pi {
        return VerdictOutcome {
            verdict: Verdict::NotReady,
            margin: None,
            damped: state.damped(),
        };
    }
    let scores = state.scores();
    let mut any_flagged = false;
    let mut worst_margin: Option<T> = None;
    for (i, &pi_i) in scores.iter().enumerate() {
        let (mean, std) = excluded_stats(scores, i);
        let threshold = mean + config.sigma_multiplier * std;
        let margin = pi_i - threshold;
        if pi_i > threshold {
            any_flagged = true;
        }
        worst_margin = Some(match worst_margin {
            Some(m) => m.max(margin),
            None => margin,
        });
    }
    let verdict = if any_flagged {
        Verdict::Attacker(state.region_ids()[argmax_first(scores)])
    } else {
        Verdict::NoAttacker
    };
    VerdictOutcome {
        verdict,
        margin: worst_margin,
        damped: state.damped(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::CommunicationGraph;
    use crate::trust::scores::DisagreementSample;
    use approx::assert_relative_eq;

    fn stabilized_state(weights: &[(usize, usize, f64)], regions: &[usize]) -> TrustState<f64> {
        let mut g = CommunicationGraph::new(regions.iter().copied());
        let mut seen = std::collections::BTreeSet::new();
        for &(a, b, _) in weights {
            let key = (a.min(b), a.max(b));
            if seen.insert(key) {
                g.add_edge(key.0, key.1).unwrap();
            }
        }
        let mut st = TrustState::new(regions).unwrap();
        let samples: Vec<DisagreementSample<f64>> = weights
            .iter()
            .map(|&(observer, about, sum_sq)| DisagreementSample {
                observer,
                about,
                sum_sq,
                shared_len: 1,
                time_slots: 1,
            })
            .collect();
        let config = TrustConfig::default();
        st.record_round(&samples).unwrap();
        st.update_scores(&g, &config).unwrap();
        st.record_round(&samples).unwrap();
        st.update_scores(&g, &config).unwrap();
        st
    }

    #[test]
    fn dominant_score_is_named() {
        let st = stabilized_state(
            &[
                (1, 2, 0.01),
                (1, 3, 8.0),
                (2, 1, 0.01),
                (2, 3, 8.0),
                (3, 1, 0.01),
                (3, 2, 0.01),
            ],
            &[1, 2, 3],
        );
        let out = check_verdict(&st, &TrustConfig::default());
        assert_eq!(out.verdict, Verdict::Attacker(3));
        assert!(out.margin.unwrap() > 0.0);
    }

    #[test]
    fn balanced_scores_are_clean() {
        let st = stabilized_state(
            &[
                (1, 2, 1.0),
                (1, 3, 1.0),
                (2, 1, 1.0),
                (2, 3, 1.0),
                (3, 1, 1.0),
                (3, 2, 1.0),
            ],
            &[1, 2, 3],
        );
        let out = check_verdict(&st, &TrustConfig::default());
        assert_eq!(out.verdict, Verdict::NoAttacker);
        assert!(out.margin.unwrap() <= 0.0);
    }

    #[test]
    fn two_region_tie_stays_clean_with_zero_margin() {
        let st = stabilized_state(&[(1, 2, 1.0), (2, 1, 1.0)], &[1, 2]);
        let out = check_verdict(&st, &TrustConfig::default());
        assert_eq!(out.verdict, Verdict::NoAttacker);
        assert_relative_eq!(out.margin.unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn no_verdict_before_two_stable_score_rounds() {
        let mut st = TrustState::<f64>::new(&[1, 2]).unwrap();
        let g = CommunicationGraph::new([1, 2]);
        let out = check_verdict(&st, &TrustConfig::default());
        assert_eq!(out.verdict, Verdict::NotReady);
        assert!(out.margin.is_none());
        let mut g2 = g;
        g2.add_edge(1, 2).unwrap();
        st.record_round(&[DisagreementSample {
            observer: 1,
            about: 2,
            sum_sq: 1.0,
            shared_len: 1,
            time_slots: 1,
        }])
        .unwrap();
        st.update_scores(&g2, &TrustConfig::default()).unwrap();
        assert_eq!(
            check_verdict(&st, &TrustConfig::default()).verdict,
            Verdict::NotReady
        );
    }

    #[test]
    fn excluded_stats_skip_the_candidate() {
        let scores = [0.6, 0.2, 0.2];
        let (mean, std) = excluded_stats(&scores, 0);
        assert_relative_eq!(mean, 0.2);
        assert_relative_eq!(std, 0.0);
        let (mean1, std1) = excluded_stats(&scores, 1);
        assert_relative_eq!(mean1, 0.4);
        assert_relative_eq!(std1, 0.2);
    }

    #[test]
    fn ties_resolve_to_the_lowest_region_id() {
        assert_eq!(argmax_first(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax_first(&[0.1, 0.5, 0.5]), 1);
        assert_eq!(argmax_first(&[0.2, 0.3, 0.5]), 2);
    }
}
