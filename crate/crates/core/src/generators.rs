//! Named game constructors used by run configurations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::game::{GameError, GameSpec};

/// Random features and contexts in `[-1, 1]`, with features rescaled so the
/// largest `|⟨φ, z⟩|` sits just below 1.
pub fn random_bilinear(
    players: usize,
    actions: usize,
    dim: usize,
    contexts: usize,
    seed: u64,
) -> Result<GameSpec, GameError> {
    if players < 2 || actions < 2 || dim < 1 || contexts < 1 {
        return Err(GameError::Dimensions(format!(
            "random-bilinear needs players >= 2, actions >= 2, dim >= 1, contexts >= 1 \
             (got {players}, {actions}, {dim}, {contexts})"
        )));
    }
    let joint = actions
        .checked_pow(players as u32)
        .filter(|n| *n <= 1 << 20)
        .ok_or_else(|| {
            GameError::Dimensions(format!("{actions}^{players} joint actions is too many"))
        })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx: Vec<Vec<f64>> = (0..contexts)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let mut features: Vec<Vec<f64>> = (0..players)
        .map(|_| {
            (0..joint * dim)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect()
        })
        .collect();
    let mut max_cost: f64 = 0.0;
    for block in &features {
        for phi in block.chunks(dim) {
            for z in &ctx {
                let c: f64 = phi.iter().zip(z).map(|(a, b)| a * b).sum();
                max_cost = max_cost.max(c.abs());
            }
        }
    }
    if max_cost > 0.0 {
        let scale = (1.0 - 1e-12) / max_cost;
        features.iter_mut().flatten().for_each(|f| *f *= scale);
    }
    GameSpec::new(players, actions, dim, features, ctx)
}

/// Two-player zero-sum game with one context: player 0 pays `A[a0][a1]`,
/// player 1 pays `-A[a0][a1]`, entries of `A` uniform in `[-1, 1]`.
pub fn zero_sum_2p(actions: usize, seed: u64) -> Result<GameSpec, GameError> {
    if actions < 2 {
        return Err(GameError::Dimensions(format!(
            "zero-sum-2p needs actions >= 2, got {actions}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payoff: Vec<f64> = (0..actions * actions)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let negated = payoff.iter().map(|v| -v).collect();
    GameSpec::new(2, actions, 1, vec![payoff, negated], vec![vec![1.0]])
}

const DEMO_OWN: [f64; 3] = [-0.6, 0.0, 0.6];
const DEMO_COORDINATION: f64 = 0.35;

/// Two players, three actions, two contexts. The first feature is an own-action
/// cost that context 0 reads with sign `+` and context 1 with sign `-`, so the
/// preferred action flips between contexts; the second feature rewards
/// matching the opponent's action in both contexts.
pub fn cyclic_demo() -> GameSpec {
    let k = 3;
    let mut features: Vec<Vec<f64>> = (0..2).map(|_| Vec::with_capacity(k * k * 2)).collect();
    for a0 in 0..k {
        for a1 in 0..k {
            let interaction = if a0 == a1 { -1.0 } else { 0.5 };
            for (j, own) in [a0, a1].into_iter().enumerate() {
                features[j].push(DEMO_OWN[own]);
                features[j].push(DEMO_COORDINATION * interaction);
            }
        }
    }
    GameSpec::new(2, k, 2, features, vec![vec![1.0, 1.0], vec![-1.0, 1.0]])
        .expect("demo game is valid")
}

/// Each player's cost depends only on its own action and the context; contexts
/// are the standard basis, so losses are constant within a context whatever
/// the opponents do.
pub fn separable(
    players: usize,
    actions: usize,
    contexts: usize,
    seed: u64,
) -> Result<GameSpec, GameError> {
    if players < 2 || actions < 2 || contexts < 1 {
        return Err(GameError::Dimensions(format!(
            "separable needs players >= 2, actions >= 2, contexts >= 1 (got {players}, {actions}, {contexts})"
        )));
    }
    let joint = actions
        .checked_pow(players as u32)
        .filter(|n| *n <= 1 << 20)
        .ok_or_else(|| {
            GameError::Dimensions(format!("{actions}^{players} joint actions is too many"))
        })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let own: Vec<Vec<Vec<f64>>> = (0..players)
        .map(|_| {
            (0..actions)
                .map(|_| {
                    (0..contexts)
                        .map(|_| rng.random_range(-1.0..=1.0))
                        .collect()
                })
                .collect()
        })
        .collect();
    let features = (0..players)
        .map(|j| {
            let stride = actions.pow((players - 1 - j) as u32);
            (0..joint)
                .flat_map(|a| own[j][(a / stride) % actions].iter().copied())
                .collect()
        })
        .collect();
    let ctx = (0..contexts)
        .map(|c| {
            (0..contexts)
                .map(|i| if i == c { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    GameSpec::new(players, actions, contexts, features, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{loss_vector, MixedStrategy};

    #[test]
    fn random_bilinear_is_valid_and_seeded() {
        let a = random_bilinear(3, 3, 4, 2, 5).unwrap();
        let b = random_bilinear(3, 3, 4, 2, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_bilinear(3, 3, 4, 2, 6).unwrap());
    }

    #[test]
    fn demo_preferences_flip() {
        let spec = cyclic_demo();
        let u = [MixedStrategy::uniform(3)];
        let l0 = loss_vector(&spec, 0, &u, 0).unwrap();
        let l1 = loss_vector(&spec, 0, &u, 1).unwrap();
        assert_eq!(crate::metrics::argmin(l0.values()), 0);
        assert_eq!(crate::metrics::argmin(l1.values()), 2);
    }

    #[test]
    fn separable_losses_ignore_opponents() {
        let spec = separable(2, 3, 2, 1).unwrap();
        for z in 0..2 {
            let a = loss_vector(&spec, 1, &[MixedStrategy::point_mass(3, 0)], z).unwrap();
            let b = loss_vector(&spec, 1, &[MixedStrategy::uniform(3)], z).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_sum_costs_cancel() {
        let spec = zero_sum_2p(3, 2).unwrap();
        for a in 0..9 {
            assert_eq!(spec.feature(0, a)[0], -spec.feature(1, a)[0]);
        }
    }
}
