//! Context predictors and the misprediction ledger.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictionError {
    #[error("noise probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("noisy predictor with p > 0 needs at least 2 contexts")]
    SingleContextNoise,
    #[error("scripted predictions cover {len} rounds, horizon is {horizon}")]
    ScriptTooShort { len: usize, horizon: usize },
    #[error(
        "scripted prediction {value} at round {round} is not a context index (m = {contexts})"
    )]
    ScriptValue {
        round: usize,
        value: usize,
        contexts: usize,
    },
    #[error("round {round} outside horizon {horizon}")]
    RoundOutOfRange { round: usize, horizon: usize },
    #[error("player {player} outside {players} players")]
    PlayerOutOfRange { player: usize, players: usize },
    #[error("context index {index} out of range for {contexts} contexts")]
    ContextOutOfRange { index: usize, contexts: usize },
    #[error("history has {got} entries at round {round}")]
    History { got: usize, round: usize },
    #[error("round {round}, player {player} already recorded")]
    DoubleWrite { round: usize, player: usize },
}

/// How a player forms its context prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PredictorKind {
    /// The realized context.
    Oracle,
    /// The realized context, replaced with probability `p` by a uniformly
    /// drawn different context.
    Noisy { p: f64 },
    /// A fixed sequence indexed by round.
    Scripted { sequence: Vec<usize> },
    /// Most frequent realized context so far; ties and round 0 go to index 0.
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    #[serde(flatten)]
    pub kind: PredictorKind,
    /// Seed for the noisy kind.
    #[serde(default)]
    pub seed: u64,
}

impl PredictorConfig {
    pub fn oracle() -> Self {
        Self {
            kind: PredictorKind::Oracle,
            seed: 0,
        }
    }

    pub fn noisy(p: f64, seed: u64) -> Self {
        Self {
            kind: PredictorKind::Noisy { p },
            seed,
        }
    }

    pub fn scripted(sequence: Vec<usize>) -> Self {
        Self {
            kind: PredictorKind::Scripted { sequence },
            seed: 0,
        }
    }

    pub fn majority() -> Self {
        Self {
            kind: PredictorKind::Majority,
            seed: 0,
        }
    }

    /// Noise level, zero for every kind except `noisy`.
    pub fn noise(&self) -> f64 {
        match self.kind {
            PredictorKind::Noisy { p } => p,
            _ => 0.0,
        }
    }

    /// Checks the config against a game with `contexts` contexts run for `horizon` rounds.
    pub fn validate(&self, contexts: usize, horizon: usize) -> Result<(), PredictionError> {
        match &self.kind {
            PredictorKind::Oracle | PredictorKind::Majority => Ok(()),
            PredictorKind::Noisy { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(PredictionError::Probability(*p));
                }
                if *p > 0.0 && contexts < 2 {
                    return Err(PredictionError::SingleContextNoise);
                }
                Ok(())
            }
            PredictorKind::Scripted { sequence } => {
                if sequence.len() < horizon {
                    return Err(PredictionError::ScriptTooShort {
                        len: sequence.len(),
                        horizon,
                    });
                }
                if let Some((round, &value)) =
                    sequence.iter().enumerate().find(|(_, z)| **z >= contexts)
                {
                    return Err(PredictionError::ScriptValue {
                        round,
                        value,
                        contexts,
                    });
                }
                Ok(())
            }
        }
    }
}

/// Prediction for `round` (0-based).
///
/// `history` holds the realized contexts of rounds `0..round` and must have
/// exactly `round` entries. `realized_context` is read only by the oracle and
/// noisy kinds. `player` keys the noisy kind's random stream; callers that want
/// all players to share one stream pass the same value for every player.
pub fn predict(
    config: &PredictorConfig,
    contexts: usize,
    player: usize,
    round: usize,
    realized_context: usize,
    history: &[usize],
) -> Result<usize, PredictionError> {
    if history.len() != round {
        return Err(PredictionError::History {
            got: history.len(),
            round,
        });
    }
    if realized_context >= contexts {
        return Err(PredictionError::ContextOutOfRange {
            index: realized_context,
            contexts,
        });
    }
    match &config.kind {
        PredictorKind::Oracle => Ok(realized_context),
        PredictorKind::Noisy { p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(PredictionError::Probability(*p));
            }
            if *p == 0.0 {
                return Ok(realized_context);
            }
            if contexts < 2 {
                return Err(PredictionError::SingleContextNoise);
            }
            let mut draws = rng::keyed(config.seed, player as u64, round as u64);
            let u: f64 = draws.random();
            if u < *p {
                let other = draws.random_range(0..contexts - 1);
                Ok(if other >= realized_context {
                    other + 1
                } else {
                    other
                })
            } else {
                Ok(realized_context)
            }
        }
        PredictorKind::Scripted { sequence } => {
            let z = *sequence.get(round).ok_or(PredictionError::ScriptTooShort {
                len: sequence.len(),
                horizon: round + 1,
            })?;
            if z >= contexts {
                return Err(PredictionError::ScriptValue {
                    round,
                    value: z,
                    contexts,
                });
            }
            Ok(z)
        }
        PredictorKind::Majority => {
            let mut counts = vec![0usize; contexts];
            for &z in history {
                if z >= contexts {
                    return Err(PredictionError::ContextOutOfRange { index: z, contexts });
                }
                counts[z] += 1;
            }
            // first maximum wins ties
            let (best, _) =
                counts.iter().enumerate().fold(
                    (0, 0),
                    |(bi, bc), (i, &c)| if c > bc { (i, c) } else { (bi, bc) },
                );
            Ok(best)
        }
    }
}

/// Per-round, per-player misprediction flags.
#[derive(Debug, Clone, PartialEq)]
pub struct MistakeLedger {
    horizon: usize,
    players: usize,
    flags: Vec<Option<bool>>,
    per_player_mistakes: Vec<u64>,
}

impl MistakeLedger {
    pub fn new(horizon: usize, players: usize) -> Self {
        Self {
            horizon,
            players,
            flags: vec![None; horizon * players],
            per_player_mistakes: vec![0; players],
        }
    }

    /// Writes the flag `predicted != realized` for `(round, player)`; each cell
    /// accepts exactly one write.
    pub fn record(
        &mut self,
        round: usize,
        player: usize,
        predicted: usize,
        realized: usize,
    ) -> Result<bool, PredictionError> {
        if round >= self.horizon {
            return Err(PredictionError::RoundOutOfRange {
                round,
                horizon: self.horizon,
            });
        }
        if player >= self.players {
            return Err(PredictionError::PlayerOutOfRange {
                player,
                players: self.players,
            });
        }
        let cell = &mut self.flags[round * self.players + player];
        if cell.is_some() {
            return Err(PredictionError::DoubleWrite { round, player });
        }
        let mistake = predicted != realized;
        *cell = Some(mistake);
        if mistake {
            self.per_player_mistakes[player] += 1;
        }
        Ok(mistake)
    }

    pub fn flag(&self, round: usize, player: usize) -> Option<bool> {
        self.flags
            .get(round * self.players + player)
            .copied()
            .flatten()
    }

    /// `L_T^j` for every player.
    pub fn per_player_mistakes(&self) -> &[u64] {
        &self.per_player_mistakes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn is_complete(&self) -> bool {
        self.flags.iter().all(Option::is_some)
    }
}
