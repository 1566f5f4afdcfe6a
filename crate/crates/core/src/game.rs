//! Latent-context bilinear games.
//!
//! A [`GameSpec`] fixes `J` players, each with the same `K` actions, a feature
//! map `φ^j(a) ∈ R^d` per player and joint action, and a finite list of `m`
//! context vectors. Player `j` pays `⟨φ^j(a), z⟩` when joint action `a` is
//! played under context `z`. Everything here is computed by exact enumeration
//! over joint actions; no sampling.
//!
//! Joint actions are indexed lexicographically with player 0 as the most
//! significant digit: `index = Σ_i a_i · K^(J-1-i)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking and renormalizing probability vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Slack allowed on `|loss| <= 1` for vectors produced by floating-point sums.
pub const LOSS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid dimensions: {0}")]
    Dimensions(String),
    #[error(
        "bounded-cost violation: player {player}, joint action {joint_action:?}, context {context}: \
         <phi, z> = {value}"
    )]
    BoundViolation {
        player: usize,
        joint_action: Vec<usize>,
        context: usize,
        value: f64,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("player index {index} out of range for {players} players")]
    PlayerOutOfRange { index: usize, players: usize },
    #[error("context index {index} out of range for {contexts} contexts")]
    ContextOutOfRange { index: usize, contexts: usize },
    #[error("profile has {got} strategies, expected {expected}")]
    ProfileLength { got: usize, expected: usize },
    #[error("strategy has {got} entries, expected {expected}")]
    StrategyLength { got: usize, expected: usize },
    #[error("not a probability vector: {0}")]
    NotSimplex(String),
    #[error("loss entry {value} at index {index} outside [-1, 1]")]
    LossOutOfRange { index: usize, value: f64 },
    #[error("game spec parse error: {0}")]
    Parse(String),
}

/// A mixed strategy over one player's `K` actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    probs: Vec<f64>,
}

impl MixedStrategy {
    /// Validates `probs`, renormalizing when the sum is within [`SIMPLEX_TOL`] of one.
    pub fn new(probs: Vec<f64>) -> Result<Self, GameError> {
        if probs.is_empty() {
            return Err(GameError::NotSimplex("empty vector".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(GameError::NotSimplex(format!("entry {i} = {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(GameError::NotSimplex(format!("entries sum to {sum}")));
        }
        let probs = if sum == 1.0 {
            probs
        } else {
            probs.into_iter().map(|p| p / sum).collect()
        };
        Ok(Self { probs })
    }

    pub fn uniform(actions: usize) -> Self {
        assert!(actions > 0, "uniform strategy over zero actions");
        Self {
            probs: vec![1.0 / actions as f64; actions],
        }
    }

    pub fn point_mass(actions: usize, action: usize) -> Self {
        assert!(
            action < actions,
            "point mass on action {action} of {actions}"
        );
        let mut probs = vec![0.0; actions];
        probs[action] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `⟨w, values⟩`.
    pub fn dot(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.probs.len());
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

/// One mixed strategy per player, read as the product distribution over joint actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointProfile {
    strategies: Vec<MixedStrategy>,
}

impl JointProfile {
    pub fn new(strategies: Vec<MixedStrategy>) -> Self {
        Self { strategies }
    }

    pub fn uniform(players: usize, actions: usize) -> Self {
        Self {
            strategies: vec![MixedStrategy::uniform(actions); players],
        }
    }

    pub fn strategies(&self) -> &[MixedStrategy] {
        &self.strategies
    }

    pub fn get(&self, player: usize) -> &MixedStrategy {
        &self.strategies[player]
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    /// The strategies of every player except `player`, in player order.
    pub fn opponents(&self, player: usize) -> Vec<MixedStrategy> {
        self.strategies
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != player)
            .map(|(_, s)| s.clone())
            .collect()
    }
}

/// Per-action loss vector `ℓ^j(w^{-j}, z)`; entries lie in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossVector {
    values: Vec<f64>,
}

impl LossVector {
    /// Rejects entries outside `[-1 - LOSS_TOL, 1 + LOSS_TOL]` or non-finite.
    pub fn new(values: Vec<f64>) -> Result<Self, GameError> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0 + LOSS_TOL)
        {
            return Err(GameError::LossOutOfRange { index, value });
        }
        Ok(Self { values })
    }

    pub fn zeros(actions: usize) -> Self {
        Self {
            values: vec![0.0; actions],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dense `d × K` matrix stored column-major; column `k` is the expected
/// feature vector when the player commits to action `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    actions: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn column(&self, action: usize) -> &[f64] {
        &self.data[action * self.dim..(action + 1) * self.dim]
    }

    pub fn get(&self, row: usize, action: usize) -> f64 {
        self.data[action * self.dim + row]
    }
}

/// Static definition of a latent-context bilinear game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    num_players: usize,
    num_actions: usize,
    feature_dim: usize,
    /// `features[((j * n_joint) + a) * d + i]`.
    features: Vec<f64>,
    contexts: Vec<Vec<f64>>,
}

impl GameSpec {
    /// Builds a spec from per-player flat feature arrays, each of length `K^J · d`
    /// in lexicographic joint-action order.
    ///
    /// Every triple `(j, a, z)` is checked against `|⟨φ^j(a), z⟩| <= 1`; the first
    /// violating triple is reported.
    pub fn new(
        num_players: usize,
        num_actions: usize,
        feature_dim: usize,
        features: Vec<Vec<f64>>,
        contexts: Vec<Vec<f64>>,
    ) -> Result<Self, GameError> {
        if num_players < 2 {
            return Err(GameError::Dimensions(format!(
                "need at least 2 players, got {num_players}"
            )));
        }
        if num_actions < 2 {
            return Err(GameError::Dimensions(format!(
                "need at least 2 actions, got {num_actions}"
            )));
        }
        if feature_dim < 1 {
            return Err(GameError::Dimensions(
                "feature dimension must be >= 1".into(),
            ));
        }
        if contexts.is_empty() {
            return Err(GameError::Dimensions("need at least one context".into()));
        }
        let n_joint = checked_joint_count(num_actions, num_players)?;
        if features.len() != num_players {
            return Err(GameError::Dimensions(format!(
                "features has {} player blocks, expected {num_players}",
                features.len()
            )));
        }
        for (j, block) in features.iter().enumerate() {
            if block.len() != n_joint * feature_dim {
                return Err(GameError::Dimensions(format!(
                    "features[{j}] has {} values, expected {} ({n_joint} joint actions x dim {feature_dim})",
                    block.len(),
                    n_joint * feature_dim
                )));
            }
            if let Some(i) = block.iter().position(|v| !v.is_finite()) {
                return Err(GameError::NonFinite(format!("features[{j}][{i}]")));
            }
        }
        for (z, ctx) in contexts.iter().enumerate() {
            if ctx.len() != feature_dim {
                return Err(GameError::Dimensions(format!(
                    "contexts[{z}] has length {}, expected {feature_dim}",
                    ctx.len()
                )));
            }
            if let Some(i) = ctx.iter().position(|v| !v.is_finite()) {
                return Err(GameError::NonFinite(format!("contexts[{z}][{i}]")));
            }
        }
        let spec = Self {
            num_players,
            num_actions,
            feature_dim,
            features: features.into_iter().flatten().collect(),
            contexts,
        };
        spec.check_bounded_costs()?;
        Ok(spec)
    }

    fn check_bounded_costs(&self) -> Result<(), GameError> {
        for j in 0..self.num_players {
            for a in 0..self.num_joint_actions() {
                let phi = self.feature(j, a);
                for (z, ctx) in self.contexts.iter().enumerate() {
                    let value = dot(phi, ctx);
                    if value.abs() > 1.0 {
                        return Err(GameError::BoundViolation {
                            player: j,
                            joint_action: self.decode_joint(a),
                            context: z,
                            value,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn num_joint_actions(&self) -> usize {
        self.num_actions.pow(self.num_players as u32)
    }

    pub fn contexts(&self) -> &[Vec<f64>] {
        &self.contexts
    }

    pub fn context(&self, z: usize) -> &[f64] {
        &self.contexts[z]
    }

    /// `φ^player(a)` for joint-action index `joint`.
    pub fn feature(&self, player: usize, joint: usize) -> &[f64] {
        let start = (player * self.num_joint_actions() + joint) * self.feature_dim;
        &self.features[start..start + self.feature_dim]
    }

    /// Flat feature block for one player, as accepted by [`GameSpec::new`].
    pub fn player_features(&self, player: usize) -> &[f64] {
        let len = self.num_joint_actions() * self.feature_dim;
        &self.features[player * len..(player + 1) * len]
    }

    pub fn joint_index(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.num_players);
        actions.iter().fold(0, |acc, &a| acc * self.num_actions + a)
    }

    pub fn decode_joint(&self, mut index: usize) -> Vec<usize> {
        let mut actions = vec![0; self.num_players];
        for slot in actions.iter_mut().rev() {
            *slot = index % self.num_actions;
            index /= self.num_actions;
        }
        actions
    }

    fn check_player(&self, player: usize) -> Result<(), GameError> {
        if player >= self.num_players {
            return Err(GameError::PlayerOutOfRange {
                index: player,
                players: self.num_players,
            });
        }
        Ok(())
    }

    fn check_context(&self, context: usize) -> Result<(), GameError> {
        if context >= self.contexts.len() {
            return Err(GameError::ContextOutOfRange {
                index: context,
                contexts: self.contexts.len(),
            });
        }
        Ok(())
    }

    fn check_strategies(
        &self,
        strategies: &[MixedStrategy],
        expected: usize,
    ) -> Result<(), GameError> {
        if strategies.len() != expected {
            return Err(GameError::ProfileLength {
                got: strategies.len(),
                expected,
            });
        }
        for s in strategies {
            if s.len() != self.num_actions {
                return Err(GameError::StrategyLength {
                    got: s.len(),
                    expected: self.num_actions,
                });
            }
        }
        Ok(())
    }

    /// Parses the TOML game-spec document (`players`, `actions`, `dim`,
    /// `contexts`, `features`).
    pub fn from_toml_str(text: &str) -> Result<Self, GameError> {
        let doc: GameSpecDoc = toml::from_str(text).map_err(|e| GameError::Parse(e.to_string()))?;
        doc.into_spec()
    }

    pub fn to_doc(&self) -> GameSpecDoc {
        GameSpecDoc {
            players: self.num_players,
            actions: self.num_actions,
            dim: self.feature_dim,
            contexts: self.contexts.clone(),
            features: (0..self.num_players)
                .map(|j| self.player_features(j).to_vec())
                .collect(),
        }
    }
}

/// Serialized form of a [`GameSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpecDoc {
    pub players: usize,
    pub actions: usize,
    pub dim: usize,
    pub contexts: Vec<Vec<f64>>,
    /// One flat array per player, `K^J · dim` values in lexicographic joint-action order.
    pub features: Vec<Vec<f64>>,
}

impl GameSpecDoc {
    pub fn into_spec(self) -> Result<GameSpec, GameError> {
        GameSpec::new(
            self.players,
            self.actions,
            self.dim,
            self.features,
            self.contexts,
        )
    }
}

fn checked_joint_count(actions: usize, players: usize) -> Result<usize, GameError> {
    let mut n: usize = 1;
    for _ in 0..players {
        n = n
            .checked_mul(actions)
            .filter(|n| *n <= 1 << 24)
            .ok_or_else(|| {
                GameError::Dimensions(format!("{actions}^{players} joint actions is too many"))
            })?;
    }
    Ok(n)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Φ^player(w^{-player})`: column `k` is `E[φ^player(k, a^{-player})]` under the
/// opponents' product distribution. `opponents` holds the `J-1` other players'
/// strategies in player order.
pub fn expected_feature_matrix(
    spec: &GameSpec,
    player: usize,
    opponents: &[MixedStrategy],
) -> Result<FeatureMatrix, GameError> {
    spec.check_player(player)?;
    spec.check_strategies(opponents, spec.num_players - 1)?;
    let k = spec.num_actions;
    let d = spec.feature_dim;
    let j_count = spec.num_players;
    let own_stride = k.pow((j_count - 1 - player) as u32);
    let mut data = vec![0.0; d * k];
    let n_opp = k.pow((j_count - 1) as u32);
    let mut opp_actions = vec![0usize; j_count - 1];
    for _ in 0..n_opp {
        let mut prob = 1.0;
        let mut base = 0;
        let mut o = 0;
        for slot in 0..j_count {
            base *= k;
            if slot == player {
                continue;
            }
            let a = opp_actions[o];
            prob *= opponents[o].probs()[a];
            base += a;
            o += 1;
        }
        if prob != 0.0 {
            for own in 0..k {
                let phi = spec.feature(player, base + own * own_stride);
                let col = &mut data[own * d..(own + 1) * d];
                for (c, f) in col.iter_mut().zip(phi) {
                    *c += prob * f;
                }
            }
        }
        // odometer over opponent actions, last opponent fastest
        for slot in opp_actions.iter_mut().rev() {
            *slot += 1;
            if *slot < k {
                break;
            }
            *slot = 0;
        }
    }
    Ok(FeatureMatrix {
        dim: d,
        actions: k,
        data,
    })
}

/// `ℓ^player(w^{-player}, z) = Φ^player(w^{-player})ᵀ z`.
pub fn loss_vector(
    spec: &GameSpec,
    player: usize,
    opponents: &[MixedStrategy],
    context: usize,
) -> Result<LossVector, GameError> {
    spec.check_context(context)?;
    let phi = expected_feature_matrix(spec, player, opponents)?;
    let z = spec.context(context);
    let values = (0..phi.actions()).map(|k| dot(phi.column(k), z)).collect();
    LossVector::new(values)
}

/// Loss vector of `player` against the rest of `profile`.
pub fn loss_vector_in_profile(
    spec: &GameSpec,
    player: usize,
    profile: &JointProfile,
    context: usize,
) -> Result<LossVector, GameError> {
    spec.check_strategies(profile.strategies(), spec.num_players)?;
    spec.check_player(player)?;
    loss_vector(spec, player, &profile.opponents(player), context)
}

/// `E_{a ~ w}[⟨φ^player(a), z⟩]` summed over all `K^J` joint actions.
pub fn expected_cost(
    spec: &GameSpec,
    player: usize,
    profile: &JointProfile,
    context: usize,
) -> Result<f64, GameError> {
    spec.check_player(player)?;
    spec.check_context(context)?;
    spec.check_strategies(profile.strategies(), spec.num_players)?;
    let z = spec.context(context);
    let mut total = 0.0;
    for a in 0..spec.num_joint_actions() {
        let actions = spec.decode_joint(a);
        let prob: f64 = actions
            .iter()
            .enumerate()
            .map(|(i, &ai)| profile.get(i).probs()[ai])
            .product();
        if prob != 0.0 {
            total += prob * dot(spec.feature(player, a), z);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two_scalar() -> GameSpec {
        // player 0 features {(a0,b0):0.5, (a0,b1):-0.5, (a1,b0):0.25, (a1,b1):0.25}
        GameSpec::new(
            2,
            2,
            1,
            vec![vec![0.5, -0.5, 0.25, 0.25], vec![0.0, 0.0, 0.0, 0.0]],
            vec![vec![1.0]],
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_loss_vector() {
        let spec = two_by_two_scalar();
        let l = loss_vector(&spec, 0, &[MixedStrategy::uniform(2)], 0).unwrap();
        assert!((l.values()[0] - 0.0).abs() < 1e-15);
        assert!((l.values()[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pure_opponent_selects_feature_column() {
        let spec = GameSpec::new(
            2,
            2,
            2,
            vec![vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8], vec![0.0; 8]],
            vec![vec![0.5, 0.5]],
        )
        .unwrap();
        let m = expected_feature_matrix(&spec, 0, &[MixedStrategy::point_mass(2, 0)]).unwrap();
        assert_eq!(m.column(0), spec.feature(0, spec.joint_index(&[0, 0])));
        assert_eq!(m.column(1), spec.feature(0, spec.joint_index(&[1, 0])));
        // player 1 against player 0 pure on action 1
        let m1 = expected_feature_matrix(&spec, 1, &[MixedStrategy::point_mass(2, 1)]).unwrap();
        assert_eq!(m1.column(0), spec.feature(1, spec.joint_index(&[1, 0])));
    }

    #[test]
    fn constant_features_give_constant_columns() {
        let c = [0.3, -0.2];
        let block: Vec<f64> = (0..4).flat_map(|_| c).collect();
        let spec =
            GameSpec::new(2, 2, 2, vec![block.clone(), block], vec![vec![1.0, 1.0]]).unwrap();
        let m = expected_feature_matrix(&spec, 1, &[MixedStrategy::uniform(2)]).unwrap();
        for k in 0..2 {
            for (x, y) in m.column(k).iter().zip(c) {
                assert!((x - y).abs() < 1e-15);
            }
        }
        let l = loss_vector(&spec, 1, &[MixedStrategy::uniform(2)], 0).unwrap();
        assert!((l.values()[0] - l.values()[1]).abs() < 1e-15);
    }

    #[test]
    fn zero_context_gives_zero_losses() {
        let spec = GameSpec::new(
            2,
            3,
            1,
            vec![vec![0.9; 9], vec![-0.9; 9]],
            vec![vec![0.0], vec![1.0]],
        )
        .unwrap();
        let l = loss_vector(&spec, 0, &[MixedStrategy::uniform(3)], 0).unwrap();
        assert!(l.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn point_mass_cost_is_single_term() {
        let spec = two_by_two_scalar();
        let profile = JointProfile::new(vec![
            MixedStrategy::point_mass(2, 1),
            MixedStrategy::point_mass(2, 0),
        ]);
        let c = expected_cost(&spec, 0, &profile, 0).unwrap();
        assert_eq!(c, 0.25);
    }

    #[test]
    fn rejects_bound_violation_with_location() {
        let err = GameSpec::new(
            2,
            2,
            1,
            vec![vec![0.5, 0.5, 0.5, 0.5], vec![0.5, 0.5, 0.9, 0.5]],
            vec![vec![1.0], vec![2.1]],
        )
        .unwrap_err();
        assert_eq!(
            err,
            GameError::BoundViolation {
                player: 0,
                joint_action: vec![0, 0],
                context: 1,
                value: 0.5 * 2.1
            }
        );
    }

    #[test]
    fn rejects_bad_indices_and_lengths() {
        let spec = two_by_two_scalar();
        let u = MixedStrategy::uniform(2);
        assert!(matches!(
            expected_feature_matrix(&spec, 2, std::slice::from_ref(&u)),
            Err(GameError::PlayerOutOfRange { .. })
        ));
        assert!(matches!(
            expected_feature_matrix(&spec, 0, &[u.clone(), u.clone()]),
            Err(GameError::ProfileLength { .. })
        ));
        assert!(matches!(
            loss_vector(&spec, 0, std::slice::from_ref(&u), 1),
            Err(GameError::ContextOutOfRange { .. })
        ));
        assert!(matches!(
            expected_cost(&spec, 0, &JointProfile::new(vec![u]), 0),
            Err(GameError::ProfileLength { .. })
        ));
    }

    #[test]
    fn simplex_renormalizes_or_rejects() {
        let s = MixedStrategy::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((s.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(MixedStrategy::new(vec![0.5, 0.6]).is_err());
        assert!(MixedStrategy::new(vec![1.1, -0.1]).is_err());
        assert!(MixedStrategy::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn joint_index_is_lexicographic() {
        let spec = GameSpec::new(3, 2, 1, vec![vec![0.0; 8]; 3], vec![vec![1.0]]).unwrap();
        assert_eq!(spec.joint_index(&[1, 0, 0]), 4);
        assert_eq!(spec.joint_index(&[0, 1, 1]), 3);
        for a in 0..8 {
            assert_eq!(spec.joint_index(&spec.decode_joint(a)), a);
        }
    }

    #[test]
    fn toml_document_roundtrip() {
        let text = r#"
players = 2
actions = 2
dim = 1
contexts = [[1.0], [-1.0]]
features = [[0.5, -0.5, 0.25, 0.25], [0.0, 0.1, 0.2, 0.3]]
"#;
        let spec = GameSpec::from_toml_str(text).unwrap();
        assert_eq!(spec.num_contexts(), 2);
        let back = toml::to_string(&spec.to_doc()).unwrap();
        assert_eq!(GameSpec::from_toml_str(&back).unwrap(), spec);
    }
}
