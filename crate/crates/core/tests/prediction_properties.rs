use proptest::prelude::*;

use iso_core::generators;
use iso_core::harness::simulate;
use iso_core::prediction::{predict, PredictorConfig};

/// Chi-square critical value for 3 degrees of freedom at the 1e-3 level.
const CHI2_DF3_CRIT: f64 = 16.266;

fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

#[test]
fn noisy_predictions_fit_their_distribution() {
    let (p, m, n) = (0.3, 4, 100_000);
    let config = PredictorConfig::noisy(p, 2024);
    let history = vec![0; n];
    let mut counts = [0u64; 4];
    for t in 0..n {
        counts[predict(&config, m, 0, t, 0, &history[..t]).unwrap()] += 1;
    }
    let other = p / (m - 1) as f64 * n as f64;
    let expected = [(1.0 - p) * n as f64, other, other, other];
    let stat = chi_square(&counts, &expected);
    assert!(stat < CHI2_DF3_CRIT, "chi2 = {stat}, counts {counts:?}");
}

#[test]
fn consecutive_mistake_flags_are_independent() {
    let (p, n) = (0.3, 100_001);
    let config = PredictorConfig::noisy(p, 77);
    let history = vec![2; n];
    let flags: Vec<usize> = (0..n)
        .map(|t| usize::from(predict(&config, 3, 1, t, 2, &history[..t]).unwrap() != 2))
        .collect();
    let mut pairs = [0u64; 4];
    for w in flags.windows(2) {
        pairs[2 * w[0] + w[1]] += 1;
    }
    let total = (n - 1) as f64;
    let expected = [
        (1.0 - p) * (1.0 - p) * total,
        (1.0 - p) * p * total,
        p * (1.0 - p) * total,
        p * p * total,
    ];
    let stat = chi_square(&pairs, &expected);
    assert!(stat < CHI2_DF3_CRIT, "chi2 = {stat}, pairs {pairs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn history_driven_predictions_ignore_the_present(
        history in prop::collection::vec(0usize..4, 0..30),
        realized_a in 0usize..4,
        realized_b in 0usize..4,
        script in prop::collection::vec(0usize..4, 31),
    ) {
        let t = history.len();
        for config in [PredictorConfig::majority(), PredictorConfig::scripted(script.clone())] {
            let a = predict(&config, 4, 0, t, realized_a, &history).unwrap();
            let b = predict(&config, 4, 0, t, realized_b, &history).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn oracle_runs_never_mispredict(seed in any::<u64>(), contexts in 1usize..=4, horizon in 1usize..200) {
        let spec = generators::random_bilinear(2, 3, 2, contexts, seed).unwrap();
        let zs: Vec<usize> = (0..horizon).map(|t| (t * 7 + seed as usize) % contexts).collect();
        let sim = simulate(&spec, &zs, &[PredictorConfig::oracle(), PredictorConfig::oracle()], false, 0.2).unwrap();
        prop_assert_eq!(sim.ledger.per_player_mistakes(), &[0, 0]);
    }

    #[test]
    fn ledger_matches_a_recount_of_the_trace(seed in any::<u64>(), p in 0.0f64..=1.0, shared in any::<bool>()) {
        let spec = generators::random_bilinear(3, 2, 2, 3, seed).unwrap();
        let zs: Vec<usize> = (0..150).map(|t| (t / 5) % 3).collect();
        let predictors = vec![PredictorConfig::noisy(p, seed), PredictorConfig::majority(), PredictorConfig::noisy(p, seed ^ 1)];
        let sim = simulate(&spec, &zs, &predictors, shared, 0.5).unwrap();
        prop_assert!(sim.ledger.is_complete());
        let mut recount = vec![0u64; 3];
        for (t, r) in sim.trace.records().iter().enumerate() {
            for (j, count) in recount.iter_mut().enumerate() {
                let wrong = r.predictions[j] != zs[t];
                prop_assert_eq!(sim.ledger.flag(t, j), Some(wrong));
                *count += u64::from(wrong);
            }
        }
        prop_assert_eq!(sim.ledger.per_player_mistakes(), recount.as_slice());
    }
}

#[test]
fn shared_stream_gives_identical_noisy_predictions() {
    let spec = generators::random_bilinear(2, 2, 1, 3, 4).unwrap();
    let zs: Vec<usize> = (0..300).map(|t| t % 3).collect();
    let predictors = vec![PredictorConfig::noisy(0.4, 9); 2];
    let shared = simulate(&spec, &zs, &predictors, true, 0.5).unwrap();
    let independent = simulate(&spec, &zs, &predictors, false, 0.5).unwrap();
    let preds = |sim: &iso_core::harness::Simulation, j: usize| -> Vec<usize> {
        sim.trace
            .records()
            .iter()
            .map(|r| r.predictions[j])
            .collect()
    };
    assert_eq!(preds(&shared, 0), preds(&shared, 1));
    assert_ne!(preds(&independent, 0), preds(&independent, 1));
}
