//! No-regret learning in games whose costs depend on a hidden, predicted context.
//!
//! Each player keeps one optimistic Hedge learner per context, plays from the
//! learner of its predicted context and updates the learner of the realized
//! one. The [`metrics`] module measures contextual regret against the best
//! per-context comparator, within-context variation, the resulting regret
//! bound and the coarse-correlated-equilibrium gap; [`harness`] drives whole
//! experiments from a TOML configuration.

pub mod game;
pub mod generators;
pub mod harness;
pub mod learning;
pub mod metrics;
pub mod oracle;
pub mod prediction;
pub mod rng;

pub use game::{
    expected_cost, expected_feature_matrix, loss_vector, GameError, GameSpec, JointProfile,
    LossVector, MixedStrategy,
};
pub use learning::{iso_grpo_round, ContextLearnerState, LearnerBank, LearningError};
pub use metrics::{RoundRecord, RunMetrics, Trace};
pub use prediction::{MistakeLedger, PredictorConfig, PredictorKind};
