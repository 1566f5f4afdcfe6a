use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iso_core::game::{self, GameSpec, JointProfile, LossVector, MixedStrategy};
use iso_core::generators;
use iso_core::learning::{iso_grpo_round, LearnerBank};

fn assert_simplex(probs: &[f64]) {
    assert!(
        probs.iter().all(|p| p.is_finite() && *p >= 0.0),
        "{probs:?}"
    );
    assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9, "{probs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rounds_only_touch_the_realized_column(
        seed in any::<u64>(),
        players in 2usize..=3,
        actions in 2usize..=4,
        contexts in 1usize..=4,
        eta in 0.01f64..=1.0,
    ) {
        let spec = generators::random_bilinear(players, actions, 2, contexts, seed).unwrap();
        let mut bank = LearnerBank::for_game(&spec, eta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..40 {
            let before = bank.clone();
            let z = rng.random_range(0..contexts);
            let preds: Vec<usize> = (0..players).map(|_| rng.random_range(0..contexts)).collect();
            iso_grpo_round(&mut bank, &preds, z, &spec).unwrap();
            for j in 0..players {
                for c in 0..contexts {
                    let (a, b) = (before.state(j, c).unwrap(), bank.state(j, c).unwrap());
                    if c == z {
                        prop_assert_eq!(b.updates_applied, a.updates_applied + 1);
                    } else {
                        prop_assert_eq!(a, b);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_losses_keep_regret_within_log_k_over_eta(
        actions in 2usize..=4,
        eta in 0.01f64..=0.3,
        raw in prop::collection::vec(-1.0f64..=1.0, 4),
        rounds in 1usize..400,
    ) {
        let loss = LossVector::new(raw[..actions].to_vec()).unwrap();
        let best = loss.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let mut bank = LearnerBank::new(1, 1, actions, eta).unwrap();
        let mut regret = 0.0;
        let cap = (actions as f64).ln() / eta + 1e-9;
        for _ in 0..rounds {
            let w = bank.current_distribution(0, 0).unwrap();
            regret += w.dot(loss.values()) - best;
            prop_assert!(regret <= cap, "regret {} > {}", regret, cap);
            bank.apply_update(0, 0, &loss).unwrap();
        }
    }
}

#[test]
fn extreme_losses_keep_distributions_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut random_bank = LearnerBank::new(1, 1, 4, 1.0).unwrap();
    let mut pinned_bank = LearnerBank::new(1, 1, 3, 1.0).unwrap();
    let pinned = LossVector::new(vec![-1.0, 1.0, 1.0]).unwrap();
    for t in 0..100_000 {
        let raw: Vec<f64> = (0..4)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        random_bank
            .apply_update(0, 0, &LossVector::new(raw).unwrap())
            .unwrap();
        pinned_bank.apply_update(0, 0, &pinned).unwrap();
        if t % 997 == 0 || t == 99_999 {
            assert_simplex(random_bank.current_distribution(0, 0).unwrap().probs());
            assert_simplex(pinned_bank.current_distribution(0, 0).unwrap().probs());
        }
    }
    assert_eq!(
        pinned_bank.current_distribution(0, 0).unwrap().probs()[0],
        1.0
    );
}

#[test]
fn identical_inputs_give_identical_banks() {
    let spec = generators::random_bilinear(3, 3, 2, 3, 11).unwrap();
    let play = || {
        let mut bank = LearnerBank::for_game(&spec, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let z = rng.random_range(0..3);
            let preds: Vec<usize> = (0..3).map(|_| rng.random_range(0..3)).collect();
            iso_grpo_round(&mut bank, &preds, z, &spec).unwrap();
        }
        bank
    };
    let (a, b) = (play(), play());
    assert_eq!(a, b);
    assert_eq!(a.to_snapshot(), b.to_snapshot());
}

/// Player 0 wants to match, player 1 wants to mismatch.
fn matching_pennies() -> GameSpec {
    let matcher = vec![-1.0, 1.0, 1.0, -1.0];
    let mismatcher = matcher.iter().map(|x| -x).collect();
    GameSpec::new(2, 2, 1, vec![matcher, mismatcher], vec![vec![1.0]]).unwrap()
}

/// Largest gain from a unilateral switch to a pure action.
fn deviation_gain(spec: &GameSpec, p: f64, q: f64) -> f64 {
    let profile = JointProfile::new(vec![
        MixedStrategy::new(vec![p, 1.0 - p]).unwrap(),
        MixedStrategy::new(vec![q, 1.0 - q]).unwrap(),
    ]);
    (0..2)
        .map(|j| {
            let cost = game::expected_cost(spec, j, &profile, 0).unwrap();
            let loss = game::loss_vector_in_profile(spec, j, &profile, 0).unwrap();
            cost - loss.values().iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[test]
fn uniform_is_the_only_equilibrium_of_matching_pennies() {
    let spec = matching_pennies();
    let mut equilibria = Vec::new();
    for a in 0..=100 {
        for b in 0..=100 {
            let (p, q) = (a as f64 / 100.0, b as f64 / 100.0);
            if deviation_gain(&spec, p, q) <= 1e-12 {
                equilibria.push((a, b));
            }
        }
    }
    assert_eq!(equilibria, vec![(50, 50)]);
}

#[test]
fn matching_pennies_average_play_is_near_uniform() {
    let spec = matching_pennies();
    let mut bank = LearnerBank::for_game(&spec, 0.1).unwrap();
    let mut avg = [[0.0; 2]; 2];
    for _ in 0..100 {
        let out = iso_grpo_round(&mut bank, &[0, 0], 0, &spec).unwrap();
        for (j, s) in out.profile.strategies().iter().enumerate() {
            avg[j][0] += s.probs()[0] / 100.0;
            avg[j][1] += s.probs()[1] / 100.0;
        }
    }
    for a in avg {
        assert!(
            (a[0] - 0.5).abs() <= 0.1 && (a[1] - 0.5).abs() <= 0.1,
            "{a:?}"
        );
    }
}

#[test]
fn matching_pennies_off_center_start_still_averages_near_uniform() {
    let spec = matching_pennies();
    let mut bank = LearnerBank::for_game(&spec, 0.1).unwrap();
    bank.apply_update(0, 0, &LossVector::new(vec![-1.0, 1.0]).unwrap())
        .unwrap();
    let mut avg = [0.0; 2];
    let horizon = 2000;
    for _ in 0..horizon {
        let out = iso_grpo_round(&mut bank, &[0, 0], 0, &spec).unwrap();
        for (j, s) in out.profile.strategies().iter().enumerate() {
            avg[j] += s.probs()[0] / horizon as f64;
        }
    }
    for a in avg {
        assert!((a - 0.5).abs() <= 0.1, "{avg:?}");
    }
}
