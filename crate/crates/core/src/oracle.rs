//! Brute-force reference computations for small instances.
//!
//! Nothing in here calls into the game, learning, or metrics modules; inputs
//! are plain vectors so the two code paths stay independent.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{what} = {got} exceeds oracle limit {limit}")]
    LimitExceeded {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("grid resolution {0} must be in [0.01, 1]")]
    Resolution(f64),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

/// Size limits for oracle inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmallInstanceLimit {
    pub max_joint_actions: usize,
    pub max_rounds: usize,
}

impl Default for SmallInstanceLimit {
    fn default() -> Self {
        Self {
            max_joint_actions: 4096,
            max_rounds: 512,
        }
    }
}

/// Largest action count the grid comparator accepts.
pub const GRID_MAX_ACTIONS: usize = 4;

/// One round as plain numbers: per-player strategies and loss vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRound {
    pub context: usize,
    pub strategies: Vec<Vec<f64>>,
    pub losses: Vec<Vec<f64>>,
}

/// `Σ_a Π_i w^i(a_i) · ⟨φ(a), z⟩` by direct enumeration.
///
/// `features` is the flat `K^J · d` block of one player, lexicographic with
/// player 0 most significant.
pub fn brute_expected_cost(
    actions: usize,
    features: &[f64],
    context: &[f64],
    profile: &[Vec<f64>],
    limit: SmallInstanceLimit,
) -> Result<f64, OracleError> {
    let players = profile.len();
    if players == 0 || actions == 0 || context.is_empty() {
        return Err(OracleError::Empty("profile, actions or context"));
    }
    let mut joint = 1usize;
    for _ in 0..players {
        joint = joint.saturating_mul(actions);
    }
    if joint > limit.max_joint_actions {
        return Err(OracleError::LimitExceeded {
            what: "joint actions",
            got: joint,
            limit: limit.max_joint_actions,
        });
    }
    let d = context.len();
    let mut total = 0.0;
    for index in 0..joint {
        let mut rest = index;
        let mut prob = 1.0;
        for i in (0..players).rev() {
            prob *= profile[i][rest % actions];
            rest /= actions;
        }
        let mut cost = 0.0;
        for r in 0..d {
            cost += features[index * d + r] * context[r];
        }
        total += prob * cost;
    }
    Ok(total)
}

/// Minimizes `Σ_t ⟨w, ℓ_t⟩` over the grid `{w ∈ Δ_K : w_k ∈ resolution · N}`.
/// Returns the first minimizing grid point in lexicographic order and its value.
pub fn grid_comparator(
    losses: &[Vec<f64>],
    actions: usize,
    resolution: f64,
    limit: SmallInstanceLimit,
) -> Result<(Vec<f64>, f64), OracleError> {
    if actions > GRID_MAX_ACTIONS {
        return Err(OracleError::LimitExceeded {
            what: "actions",
            got: actions,
            limit: GRID_MAX_ACTIONS,
        });
    }
    if actions == 0 {
        return Err(OracleError::Empty("actions"));
    }
    if losses.len() > limit.max_rounds {
        return Err(OracleError::LimitExceeded {
            what: "rounds",
            got: losses.len(),
            limit: limit.max_rounds,
        });
    }
    if !(0.01..=1.0).contains(&resolution) {
        return Err(OracleError::Resolution(resolution));
    }
    let steps = (1.0 / resolution).round() as usize;
    let mut summed = vec![0.0; actions];
    for l in losses {
        for k in 0..actions {
            summed[k] += l[k];
        }
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut counts = vec![0usize; actions];
    enumerate_compositions(steps, 0, &mut counts, &mut |c| {
        let value: f64 = (0..actions)
            .map(|k| c[k] as f64 / steps as f64 * summed[k])
            .sum();
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((c.to_vec(), value));
        }
    });
    let (c, value) = best.expect("grid is non-empty");
    Ok((c.iter().map(|&n| n as f64 / steps as f64).collect(), value))
}

fn enumerate_compositions(
    remaining: usize,
    slot: usize,
    counts: &mut [usize],
    visit: &mut impl FnMut(&[usize]),
) {
    if slot == counts.len() - 1 {
        counts[slot] = remaining;
        visit(counts);
        return;
    }
    for n in 0..=remaining {
        counts[slot] = n;
        enumerate_compositions(remaining - n, slot + 1, counts, visit);
    }
}

/// `max_j max_k (1/T) Σ_t (⟨w_t^j, ℓ_t^j⟩ - ℓ_t^j[k])`.
pub fn exhaustive_cce_gap(
    rounds: &[OracleRound],
    limit: SmallInstanceLimit,
) -> Result<f64, OracleError> {
    if rounds.is_empty() {
        return Err(OracleError::Empty("rounds"));
    }
    if rounds.len() > limit.max_rounds {
        return Err(OracleError::LimitExceeded {
            what: "rounds",
            got: rounds.len(),
            limit: limit.max_rounds,
        });
    }
    let players = rounds[0].strategies.len();
    let actions = rounds[0].losses[0].len();
    let t = rounds.len() as f64;
    let mut gap = f64::NEG_INFINITY;
    for j in 0..players {
        for k in 0..actions {
            let mut sum = 0.0;
            for r in rounds {
                let mut played = 0.0;
                for a in 0..actions {
                    played += r.strategies[j][a] * r.losses[j][a];
                }
                sum += played - r.losses[j][k];
            }
            gap = gap.max(sum / t);
        }
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_profile_is_single_term() {
        // 2 players, 2 actions, d = 1; joint (1, 0) has feature 0.25
        let features = [0.5, -0.5, 0.25, 0.75];
        let c = brute_expected_cost(
            2,
            &features,
            &[2.0],
            &[vec![0.0, 1.0], vec![1.0, 0.0]],
            SmallInstanceLimit::default(),
        )
        .unwrap();
        assert_eq!(c, 0.5);
    }

    #[test]
    fn zero_features_cost_nothing() {
        let c = brute_expected_cost(
            3,
            &[0.0; 27 * 2],
            &[1.0, -1.0],
            &vec![vec![1.0 / 3.0; 3]; 3],
            SmallInstanceLimit::default(),
        )
        .unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn limits_are_enforced() {
        let limit = SmallInstanceLimit {
            max_joint_actions: 8,
            max_rounds: 2,
        };
        assert!(
            brute_expected_cost(3, &[0.0; 27], &[1.0], &vec![vec![1.0, 0.0, 0.0]; 3], limit)
                .is_err()
        );
        assert!(grid_comparator(&[vec![0.0; 5]], 5, 0.1, limit).is_err());
        assert!(grid_comparator(&vec![vec![0.0; 2]; 3], 2, 0.1, limit).is_err());
        assert!(grid_comparator(&[vec![0.0; 2]], 2, 0.001, limit).is_err());
    }

    #[test]
    fn grid_zero_losses_and_dominance() {
        let limit = SmallInstanceLimit::default();
        let (_, v) = grid_comparator(&[vec![0.0; 3]], 3, 0.05, limit).unwrap();
        assert_eq!(v, 0.0);
        let (w, _) =
            grid_comparator(&[vec![0.2, 0.9, 0.1], vec![0.1, 0.8, 0.3]], 3, 0.01, limit).unwrap();
        assert!(w[1] <= 0.01);
    }

    #[test]
    fn single_round_gap() {
        let rounds = [OracleRound {
            context: 0,
            strategies: vec![vec![0.0, 1.0, 0.0]],
            losses: vec![vec![0.2, 0.5, -0.3]],
        }];
        let g = exhaustive_cce_gap(&rounds, SmallInstanceLimit::default()).unwrap();
        assert!((g - 0.8).abs() < 1e-15);
    }
}
