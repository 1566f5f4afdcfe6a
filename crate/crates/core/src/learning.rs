//! Per-context optimistic Hedge learners and the prediction-routed round.
//!
//! Each player keeps one learner per context. Play is drawn from the learner
//! of the *predicted* context; the loss observed afterwards updates the learner
//! of the *realized* context only. Every other learner is left untouched.
//!
//! A learner's state is its cumulative loss and an optimism hint (the last loss
//! it was fed, initially zero). The played distribution is
//! `softmax(-η · (cumulative_loss + hint))`, evaluated in log space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{self, GameError, GameSpec, JointProfile, LossVector, MixedStrategy, LOSS_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("step size {0} outside (0, 1]")]
    StepSize(f64),
    #[error("player index {index} out of range for {players} players")]
    PlayerOutOfRange { index: usize, players: usize },
    #[error("context index {index} out of range for {contexts} contexts")]
    ContextOutOfRange { index: usize, contexts: usize },
    #[error("loss vector has {got} entries, expected {expected}")]
    LossLength { got: usize, expected: usize },
    #[error("loss entry {value} at index {index} outside [-1, 1]")]
    LossOutOfRange { index: usize, value: f64 },
    #[error("expected {expected} predictions, got {got}")]
    PredictionCount { got: usize, expected: usize },
    #[error("bank shape ({players} players, {contexts} contexts, {actions} actions) does not match game")]
    ShapeMismatch {
        players: usize,
        contexts: usize,
        actions: usize,
    },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("snapshot: {0}")]
    Snapshot(String),
}

/// State of one (player, context) learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextLearnerState {
    pub cumulative_loss: Vec<f64>,
    pub optimism_hint: Vec<f64>,
    pub updates_applied: u64,
}

impl ContextLearnerState {
    pub fn fresh(actions: usize) -> Self {
        Self {
            cumulative_loss: vec![0.0; actions],
            optimism_hint: vec![0.0; actions],
            updates_applied: 0,
        }
    }
}

/// `J × m` learners sharing one step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerBank {
    players: usize,
    contexts: usize,
    actions: usize,
    eta: f64,
    /// Row-major by player: `states[player * contexts + context]`.
    states: Vec<ContextLearnerState>,
}

impl LearnerBank {
    pub fn new(
        players: usize,
        contexts: usize,
        actions: usize,
        eta: f64,
    ) -> Result<Self, LearningError> {
        check_eta(eta)?;
        if players == 0 || contexts == 0 || actions == 0 {
            return Err(LearningError::ShapeMismatch {
                players,
                contexts,
                actions,
            });
        }
        Ok(Self {
            players,
            contexts,
            actions,
            eta,
            states: vec![ContextLearnerState::fresh(actions); players * contexts],
        })
    }

    /// Fresh bank shaped for `spec`.
    pub fn for_game(spec: &GameSpec, eta: f64) -> Result<Self, LearningError> {
        Self::new(
            spec.num_players(),
            spec.num_contexts(),
            spec.num_actions(),
            eta,
        )
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn state(
        &self,
        player: usize,
        context: usize,
    ) -> Result<&ContextLearnerState, LearningError> {
        self.check(player, context)?;
        Ok(&self.states[player * self.contexts + context])
    }

    fn check(&self, player: usize, context: usize) -> Result<(), LearningError> {
        if player >= self.players {
            return Err(LearningError::PlayerOutOfRange {
                index: player,
                players: self.players,
            });
        }
        if context >= self.contexts {
            return Err(LearningError::ContextOutOfRange {
                index: context,
                contexts: self.contexts,
            });
        }
        Ok(())
    }

    /// Optimistic Hedge distribution of learner `(player, context)`.
    pub fn current_distribution(
        &self,
        player: usize,
        context: usize,
    ) -> Result<MixedStrategy, LearningError> {
        let state = self.state(player, context)?;
        let logits: Vec<f64> = state
            .cumulative_loss
            .iter()
            .zip(&state.optimism_hint)
            .map(|(l, h)| -self.eta * (l + h))
            .collect();
        Ok(MixedStrategy::new(softmax(&logits))?)
    }

    /// Feeds `loss` to learner `(player, realized_context)`: accumulate it and
    /// make it the new hint. No other learner changes.
    pub fn apply_update(
        &mut self,
        player: usize,
        realized_context: usize,
        loss: &LossVector,
    ) -> Result<(), LearningError> {
        self.check(player, realized_context)?;
        if loss.len() != self.actions {
            return Err(LearningError::LossLength {
                got: loss.len(),
                expected: self.actions,
            });
        }
        if let Some((index, &value)) = loss
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0 + LOSS_TOL)
        {
            return Err(LearningError::LossOutOfRange { index, value });
        }
        let state = &mut self.states[player * self.contexts + realized_context];
        for (c, l) in state.cumulative_loss.iter_mut().zip(loss.values()) {
            *c += l;
        }
        state.optimism_hint.copy_from_slice(loss.values());
        state.updates_applied += 1;
        Ok(())
    }

    /// Text snapshot of the whole bank (JSON).
    pub fn to_snapshot(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&BankSnapshot::from(self)).expect("bank serializes");
        s.push('\n');
        s
    }

    pub fn from_snapshot(text: &str) -> Result<Self, LearningError> {
        let snap: BankSnapshot =
            serde_json::from_str(text).map_err(|e| LearningError::Snapshot(e.to_string()))?;
        snap.try_into()
    }
}

/// On-disk layout of a bank: one entry per player, one state per context.
#[derive(Debug, Serialize, Deserialize)]
struct BankSnapshot {
    eta: f64,
    actions: usize,
    players: Vec<Vec<ContextLearnerState>>,
}

impl From<&LearnerBank> for BankSnapshot {
    fn from(bank: &LearnerBank) -> Self {
        Self {
            eta: bank.eta,
            actions: bank.actions,
            players: bank
                .states
                .chunks(bank.contexts)
                .map(<[_]>::to_vec)
                .collect(),
        }
    }
}

impl TryFrom<BankSnapshot> for LearnerBank {
    type Error = LearningError;

    fn try_from(snap: BankSnapshot) -> Result<Self, Self::Error> {
        let contexts = snap.players.first().map_or(0, Vec::len);
        let mut bank = LearnerBank::new(snap.players.len(), contexts, snap.actions, snap.eta)?;
        for (j, row) in snap.players.into_iter().enumerate() {
            if row.len() != contexts {
                return Err(LearningError::Snapshot(format!(
                    "player {j} has {} contexts, expected {contexts}",
                    row.len()
                )));
            }
            for (z, state) in row.into_iter().enumerate() {
                if state.cumulative_loss.len() != snap.actions
                    || state.optimism_hint.len() != snap.actions
                {
                    return Err(LearningError::Snapshot(format!(
                        "player {j} context {z}: vectors must have {} entries",
                        snap.actions
                    )));
                }
                bank.states[j * contexts + z] = state;
            }
        }
        Ok(bank)
    }
}

pub(crate) fn check_eta(eta: f64) -> Result<(), LearningError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(LearningError::StepSize(eta));
    }
    Ok(())
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Outcome of one routed round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub profile: JointProfile,
    pub losses: Vec<LossVector>,
}

/// One round of prediction-routed play.
///
/// Every player's strategy is read from the pre-round bank at its predicted
/// context; losses are evaluated at the realized context against the others'
/// just-selected strategies; then each player's realized-context learner is
/// updated.
pub fn iso_grpo_round(
    bank: &mut LearnerBank,
    predictions: &[usize],
    realized_context: usize,
    spec: &GameSpec,
) -> Result<RoundOutcome, LearningError> {
    if bank.players != spec.num_players()
        || bank.contexts != spec.num_contexts()
        || bank.actions != spec.num_actions()
    {
        return Err(LearningError::ShapeMismatch {
            players: bank.players,
            contexts: bank.contexts,
            actions: bank.actions,
        });
    }
    if predictions.len() != bank.players {
        return Err(LearningError::PredictionCount {
            got: predictions.len(),
            expected: bank.players,
        });
    }
    if realized_context >= bank.contexts {
        return Err(LearningError::ContextOutOfRange {
            index: realized_context,
            contexts: bank.contexts,
        });
    }
    let strategies = predictions
        .iter()
        .enumerate()
        .map(|(j, &z_hat)| bank.current_distribution(j, z_hat))
        .collect::<Result<Vec<_>, _>>()?;
    let profile = JointProfile::new(strategies);
    let losses = (0..bank.players)
        .map(|j| game::loss_vector_in_profile(spec, j, &profile, realized_context))
        .collect::<Result<Vec<_>, _>>()?;
    for (j, loss) in losses.iter().enumerate() {
        bank.apply_update(j, realized_context, loss)?;
    }
    Ok(RoundOutcome { profile, losses })
}
