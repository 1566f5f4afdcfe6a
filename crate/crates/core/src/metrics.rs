//! Regret, variation, bound and equilibrium-gap measurements over a finished trace.
//!
//! All functions here are pure over an immutable [`Trace`] and reject traces
//! that stop short of their configured horizon.

use serde::Serialize;
use thiserror::Error;

use crate::game::{JointProfile, LossVector, MixedStrategy};

/// Absolute tolerance for the CCE inequality check.
pub const CCE_TOL: f64 = 1e-9;

/// Smallest step size returned by [`eta_rule`].
pub const ETA_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trace has {got} of {horizon} rounds")]
    PartialTrace { got: usize, horizon: usize },
    #[error("player {index} out of range for {players} players")]
    PlayerOutOfRange { index: usize, players: usize },
    #[error("context {index} out of range for {contexts} contexts")]
    ContextOutOfRange { index: usize, contexts: usize },
    #[error("step size {0} outside (0, 1]")]
    StepSize(f64),
    #[error("malformed round {round}: {reason}")]
    MalformedRound { round: usize, reason: String },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
}

/// One round of play as seen by the metrics layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub realized_context: usize,
    pub predictions: Vec<usize>,
    pub strategies: JointProfile,
    pub losses: Vec<LossVector>,
}

impl RoundRecord {
    pub fn is_mistake(&self, player: usize) -> bool {
        self.predictions[player] != self.realized_context
    }

    /// `⟨w_t^j, ℓ_t^j⟩`.
    pub fn played_loss(&self, player: usize) -> f64 {
        self.strategies
            .get(player)
            .dot(self.losses[player].values())
    }
}

/// Ordered rounds of one run together with the run's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    players: usize,
    actions: usize,
    contexts: usize,
    horizon: usize,
    records: Vec<RoundRecord>,
}

impl Trace {
    pub fn new(players: usize, actions: usize, contexts: usize, horizon: usize) -> Self {
        Self {
            players,
            actions,
            contexts,
            horizon,
            records: Vec::with_capacity(horizon),
        }
    }

    /// Appends the next round after checking its shape.
    pub fn push(&mut self, record: RoundRecord) -> Result<(), MetricsError> {
        let round = self.records.len();
        let bad = |reason: String| MetricsError::MalformedRound { round, reason };
        if round >= self.horizon {
            return Err(bad(format!("horizon {} already reached", self.horizon)));
        }
        if record.round != round {
            return Err(bad(format!("round index {} out of sequence", record.round)));
        }
        if record.realized_context >= self.contexts {
            return Err(bad(format!("realized context {}", record.realized_context)));
        }
        if record.predictions.len() != self.players
            || record.strategies.len() != self.players
            || record.losses.len() != self.players
        {
            return Err(bad(
                "per-player field lengths differ from player count".into()
            ));
        }
        if record.predictions.iter().any(|z| *z >= self.contexts) {
            return Err(bad("prediction is not a context index".into()));
        }
        if record
            .strategies
            .strategies()
            .iter()
            .any(|s| s.len() != self.actions)
            || record.losses.iter().any(|l| l.len() != self.actions)
        {
            return Err(bad(format!("vectors must have {} entries", self.actions)));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_complete(&self) -> bool {
        self.records.len() == self.horizon
    }

    fn require_complete(&self) -> Result<(), MetricsError> {
        if self.horizon == 0 {
            return Err(MetricsError::EmptyHorizon);
        }
        if !self.is_complete() {
            return Err(MetricsError::PartialTrace {
                got: self.records.len(),
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    fn require_player(&self, player: usize) -> Result<(), MetricsError> {
        self.require_complete()?;
        if player >= self.players {
            return Err(MetricsError::PlayerOutOfRange {
                index: player,
                players: self.players,
            });
        }
        Ok(())
    }

    fn require_context(&self, context: usize) -> Result<(), MetricsError> {
        if context >= self.contexts {
            return Err(MetricsError::ContextOutOfRange {
                index: context,
                contexts: self.contexts,
            });
        }
        Ok(())
    }

    fn in_context(&self, context: usize) -> impl Iterator<Item = &RoundRecord> {
        self.records
            .iter()
            .filter(move |r| r.realized_context == context)
    }
}

/// Index of the smallest entry; lowest index on ties.
pub fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
        )
        .0
}

fn summed_losses<'a>(
    actions: usize,
    records: impl Iterator<Item = &'a RoundRecord>,
    player: usize,
) -> Vec<f64> {
    let mut total = vec![0.0; actions];
    for r in records {
        for (t, l) in total.iter_mut().zip(r.losses[player].values()) {
            *t += l;
        }
    }
    total
}

/// Best fixed strategy on the rounds where `context` was realized: the vertex
/// minimizing the summed loss. An empty subsequence yields action 0.
pub fn best_per_context_comparator(
    trace: &Trace,
    player: usize,
    context: usize,
) -> Result<MixedStrategy, MetricsError> {
    trace.require_player(player)?;
    trace.require_context(context)?;
    let totals = summed_losses(trace.actions, trace.in_context(context), player);
    Ok(MixedStrategy::point_mass(trace.actions, argmin(&totals)))
}

/// Comparator action per context for one player.
fn comparator_actions(trace: &Trace, player: usize) -> Vec<usize> {
    let mut totals = vec![vec![0.0; trace.actions]; trace.contexts];
    for r in &trace.records {
        for (t, l) in totals[r.realized_context]
            .iter_mut()
            .zip(r.losses[player].values())
        {
            *t += l;
        }
    }
    totals.iter().map(|t| argmin(t)).collect()
}

/// Per-round contextual regret terms `⟨w_t, ℓ_t⟩ - ⟨π*(Z_t), ℓ_t⟩`.
pub fn instantaneous_regrets(trace: &Trace, player: usize) -> Result<Vec<f64>, MetricsError> {
    trace.require_player(player)?;
    let best = comparator_actions(trace, player);
    Ok(trace
        .records
        .iter()
        .map(|r| r.played_loss(player) - r.losses[player].values()[best[r.realized_context]])
        .collect())
}

/// Contextual external regret of `player`.
pub fn contextual_regret(trace: &Trace, player: usize) -> Result<f64, MetricsError> {
    Ok(instantaneous_regrets(trace, player)?.iter().sum())
}

/// Regret of `player` on the subsequence where `context` was realized.
pub fn per_context_regret(
    trace: &Trace,
    player: usize,
    context: usize,
) -> Result<f64, MetricsError> {
    let comparator = best_per_context_comparator(trace, player, context)?;
    Ok(trace
        .in_context(context)
        .map(|r| r.played_loss(player) - comparator.dot(r.losses[player].values()))
        .sum())
}

/// Regret against the best single action over the whole horizon.
pub fn external_regret(trace: &Trace, player: usize) -> Result<f64, MetricsError> {
    trace.require_player(player)?;
    let totals = summed_losses(trace.actions, trace.records.iter(), player);
    let best = totals[argmin(&totals)];
    let played: f64 = trace.records.iter().map(|r| r.played_loss(player)).sum();
    Ok(played - best)
}

/// Sum of sup-norm differences between consecutive loss vectors on the
/// `context` subsequence.
pub fn within_context_variation(
    trace: &Trace,
    player: usize,
    context: usize,
) -> Result<f64, MetricsError> {
    trace.require_player(player)?;
    trace.require_context(context)?;
    let mut total = 0.0;
    let mut prev: Option<&[f64]> = None;
    for r in trace.in_context(context) {
        let cur = r.losses[player].values();
        if let Some(p) = prev {
            total += cur
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        }
        prev = Some(cur);
    }
    Ok(total)
}

/// Terms of the contextual regret bound for one player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerms {
    /// `m · log K / η`.
    pub init: f64,
    /// `2 L_T / η`.
    pub mistakes: f64,
    /// `η · Σ_z Var(z)`.
    pub variation: f64,
    pub total: f64,
    /// `total` with the variation term doubled.
    pub total_slack2: f64,
}

pub fn rvu_bound(
    contexts: usize,
    actions: usize,
    eta: f64,
    mistakes: u64,
    variations: &[f64],
) -> Result<BoundTerms, MetricsError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(MetricsError::StepSize(eta));
    }
    let init = (actions as f64).ln() / eta * contexts as f64;
    let mistakes = 2.0 / eta * mistakes as f64;
    let variation = eta * variations.iter().sum::<f64>();
    Ok(BoundTerms {
        init,
        mistakes,
        variation,
        total: init + mistakes + variation,
        total_slack2: init + mistakes + 2.0 * variation,
    })
}

/// `min(1, sqrt((m log K + L_T) / (ΣVar + 1)))`, floored at [`ETA_FLOOR`].
pub fn eta_rule(contexts: usize, actions: usize, mistakes: u64, sum_variation: f64) -> f64 {
    let num = contexts as f64 * (actions as f64).ln() + mistakes as f64;
    let den = sum_variation.max(0.0) + 1.0;
    let eta = (num / den).sqrt();
    if eta.is_nan() {
        return ETA_FLOOR;
    }
    eta.clamp(ETA_FLOOR, 1.0)
}

/// Coarse-correlated-equilibrium gap of the time-averaged play.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CceReport {
    /// External regret divided by `T`, per player.
    pub per_player: Vec<f64>,
    /// Largest entry of `per_player`.
    pub epsilon: f64,
    /// `(1/T) Σ_j contextual regret`.
    pub bound_rhs: f64,
    /// `(1/T) max_j contextual regret`.
    pub bound_rhs_max: f64,
    /// `epsilon <= bound_rhs + CCE_TOL`.
    pub satisfied: bool,
}

pub fn cce_epsilon(trace: &Trace) -> Result<CceReport, MetricsError> {
    trace.require_complete()?;
    let t = trace.horizon as f64;
    let per_player = (0..trace.players)
        .map(|j| external_regret(trace, j).map(|r| r / t))
        .collect::<Result<Vec<_>, _>>()?;
    let contextual = (0..trace.players)
        .map(|j| contextual_regret(trace, j))
        .collect::<Result<Vec<_>, _>>()?;
    let epsilon = per_player.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bound_rhs = contextual.iter().sum::<f64>() / t;
    let bound_rhs_max = contextual.iter().copied().fold(f64::NEG_INFINITY, f64::max) / t;
    Ok(CceReport {
        satisfied: epsilon <= bound_rhs + CCE_TOL,
        per_player,
        epsilon,
        bound_rhs,
        bound_rhs_max,
    })
}

/// Everything measured for one player.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerMetrics {
    pub mistakes: u64,
    pub contextual_regret: f64,
    pub external_regret: f64,
    /// `Var(z)` for every context.
    pub variation: Vec<f64>,
    pub bound: BoundTerms,
    pub exact_bound_ok: bool,
    pub slack2_bound_ok: bool,
    pub average_strategy: Vec<f64>,
}

/// Metrics of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub eta: f64,
    pub players: Vec<PlayerMetrics>,
    pub cce: CceReport,
}

impl RunMetrics {
    pub fn exact_bound_ok(&self) -> bool {
        self.players.iter().all(|p| p.exact_bound_ok)
    }

    pub fn slack2_bound_ok(&self) -> bool {
        self.players.iter().all(|p| p.slack2_bound_ok)
    }
}

pub fn compute_run_metrics(trace: &Trace, eta: f64) -> Result<RunMetrics, MetricsError> {
    trace.require_complete()?;
    let t = trace.horizon as f64;
    let mut players = Vec::with_capacity(trace.players);
    for j in 0..trace.players {
        let mistakes = trace.records.iter().filter(|r| r.is_mistake(j)).count() as u64;
        let contextual = contextual_regret(trace, j)?;
        let variation = (0..trace.contexts)
            .map(|z| within_context_variation(trace, j, z))
            .collect::<Result<Vec<_>, _>>()?;
        let bound = rvu_bound(trace.contexts, trace.actions, eta, mistakes, &variation)?;
        let mut average_strategy = vec![0.0; trace.actions];
        for r in &trace.records {
            for (a, p) in average_strategy.iter_mut().zip(r.strategies.get(j).probs()) {
                *a += p;
            }
        }
        average_strategy.iter_mut().for_each(|a| *a /= t);
        players.push(PlayerMetrics {
            mistakes,
            contextual_regret: contextual,
            external_regret: external_regret(trace, j)?,
            exact_bound_ok: contextual <= bound.total,
            slack2_bound_ok: contextual <= bound.total_slack2,
            variation,
            bound,
            average_strategy,
        });
    }
    Ok(RunMetrics {
        eta,
        players,
        cce: cce_epsilon(trace)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(round: usize, z: usize, pred: usize, w: &[f64], l: &[f64]) -> RoundRecord {
        RoundRecord {
            round,
            realized_context: z,
            predictions: vec![pred],
            strategies: JointProfile::new(vec![MixedStrategy::new(w.to_vec()).unwrap()]),
            losses: vec![LossVector::new(l.to_vec()).unwrap()],
        }
    }

    fn trace_of(actions: usize, contexts: usize, rounds: Vec<RoundRecord>) -> Trace {
        let mut t = Trace::new(1, actions, contexts, rounds.len());
        for r in rounds {
            t.push(r).unwrap();
        }
        t
    }

    #[test]
    fn comparator_single_round_and_sums() {
        let t = trace_of(2, 1, vec![rec(0, 0, 0, &[0.5, 0.5], &[0.5, -0.5])]);
        assert_eq!(
            best_per_context_comparator(&t, 0, 0).unwrap(),
            MixedStrategy::point_mass(2, 1)
        );
        let t = trace_of(
            3,
            1,
            vec![
                rec(0, 0, 0, &[1.0, 0.0, 0.0], &[0.5, 0.25, 0.1]),
                rec(1, 0, 0, &[1.0, 0.0, 0.0], &[0.5, 0.75, 0.1]),
            ],
        );
        assert_eq!(
            best_per_context_comparator(&t, 0, 0).unwrap(),
            MixedStrategy::point_mass(3, 2)
        );
    }

    #[test]
    fn comparator_empty_context_is_action_zero() {
        let t = trace_of(
            3,
            2,
            vec![rec(0, 0, 0, &[1.0, 0.0, 0.0], &[0.5, -0.5, 0.0])],
        );
        assert_eq!(
            best_per_context_comparator(&t, 0, 1).unwrap(),
            MixedStrategy::point_mass(3, 0)
        );
        assert_eq!(per_context_regret(&t, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn hand_built_three_round_regret() {
        let t = trace_of(
            2,
            2,
            vec![
                rec(0, 0, 0, &[1.0, 0.0], &[1.0, 0.0]),
                rec(1, 1, 1, &[0.0, 1.0], &[0.0, 1.0]),
                rec(2, 0, 0, &[0.0, 1.0], &[1.0, 0.0]),
            ],
        );
        assert_eq!(
            best_per_context_comparator(&t, 0, 0).unwrap(),
            MixedStrategy::point_mass(2, 1)
        );
        assert_eq!(
            best_per_context_comparator(&t, 0, 1).unwrap(),
            MixedStrategy::point_mass(2, 0)
        );
        assert_eq!(contextual_regret(&t, 0).unwrap(), 2.0);
    }

    #[test]
    fn zero_losses_zero_regret() {
        let t = trace_of(
            2,
            1,
            (0..5)
                .map(|i| rec(i, 0, 0, &[0.3, 0.7], &[0.0, 0.0]))
                .collect(),
        );
        assert_eq!(contextual_regret(&t, 0).unwrap(), 0.0);
        let cce = cce_epsilon(&t).unwrap();
        assert_eq!((cce.epsilon, cce.bound_rhs), (0.0, 0.0));
    }

    #[test]
    fn playing_the_comparator_gives_zero_regret() {
        let t = trace_of(
            2,
            2,
            vec![
                rec(0, 0, 0, &[0.0, 1.0], &[0.3, -0.2]),
                rec(1, 1, 1, &[1.0, 0.0], &[0.1, 0.4]),
                rec(2, 0, 0, &[0.0, 1.0], &[0.2, 0.1]),
            ],
        );
        assert!(contextual_regret(&t, 0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn variation_examples() {
        let t = trace_of(
            2,
            1,
            (0..4)
                .map(|i| rec(i, 0, 0, &[0.5, 0.5], &[0.3, -0.1]))
                .collect(),
        );
        assert_eq!(within_context_variation(&t, 0, 0).unwrap(), 0.0);
        let t = trace_of(
            2,
            2,
            vec![
                rec(0, 0, 0, &[0.5, 0.5], &[0.0, 0.0]),
                rec(1, 1, 1, &[0.5, 0.5], &[-1.0, 1.0]),
                rec(2, 0, 0, &[0.5, 0.5], &[0.4, -0.2]),
            ],
        );
        assert!((within_context_variation(&t, 0, 0).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(within_context_variation(&t, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn bound_arithmetic() {
        let b = rvu_bound(1, 2, 0.5, 0, &[0.0]).unwrap();
        assert!((b.total - 2.0f64.ln() / 0.5).abs() < 1e-15);
        // A = 3 ln2 / 0.5, B = 2·10/0.5 = 40, C = 0.5·4 = 2
        let b = rvu_bound(3, 2, 0.5, 10, &[1.5, 2.5, 0.0]).unwrap();
        assert!((b.init - 4.158883083359672).abs() < 1e-12);
        assert_eq!(b.mistakes, 40.0);
        assert_eq!(b.variation, 2.0);
        assert!((b.total - 46.15888308335967).abs() < 1e-12);
        assert!((b.total_slack2 - 48.15888308335967).abs() < 1e-12);
        assert_eq!(b.total, b.init + b.mistakes + b.variation);
        assert!(rvu_bound(1, 2, 0.0, 0, &[]).is_err());
        assert!(rvu_bound(1, 2, 1.01, 0, &[]).is_err());
    }

    #[test]
    fn eta_rule_cases() {
        assert!((eta_rule(1, 2, 0, 0.0) - 2.0f64.ln().sqrt()).abs() < 1e-15);
        assert!((eta_rule(1, 2, 0, 0.0) - 0.8326).abs() < 1e-4);
        assert_eq!(eta_rule(1, 2, 0, 1e300), ETA_FLOOR);
        assert_eq!(eta_rule(3, 4, 10, 2.0), 1.0);
        let eta = eta_rule(2, 3, 5, 40.0);
        let b = rvu_bound(2, 3, eta, 5, &[40.0]).unwrap();
        let expect = 2.0 * 3f64.ln() / eta + 10.0 / eta + eta * 40.0;
        assert!((b.total - expect).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_is_rejected() {
        let mut t = Trace::new(1, 2, 1, 3);
        t.push(rec(0, 0, 0, &[0.5, 0.5], &[0.1, 0.2])).unwrap();
        assert_eq!(
            contextual_regret(&t, 0),
            Err(MetricsError::PartialTrace { got: 1, horizon: 3 })
        );
        assert!(cce_epsilon(&t).is_err());
        assert!(t.push(rec(5, 0, 0, &[0.5, 0.5], &[0.1, 0.2])).is_err());
    }

    #[test]
    fn single_context_collapses_cce_bound() {
        let t = trace_of(
            2,
            1,
            vec![
                rec(0, 0, 0, &[0.2, 0.8], &[0.3, -0.4]),
                rec(1, 0, 0, &[0.6, 0.4], &[-0.5, 0.9]),
                rec(2, 0, 0, &[0.5, 0.5], &[0.1, 0.1]),
            ],
        );
        let cce = cce_epsilon(&t).unwrap();
        assert_eq!(cce.bound_rhs, external_regret(&t, 0).unwrap() / 3.0);
        assert!(cce.satisfied);
    }

    #[test]
    fn single_round_cce_pure_strategies() {
        let t = trace_of(
            3,
            1,
            vec![rec(0, 0, 0, &[0.0, 1.0, 0.0], &[0.2, 0.5, -0.3])],
        );
        assert!((cce_epsilon(&t).unwrap().epsilon - 0.8).abs() < 1e-15);
    }
}
