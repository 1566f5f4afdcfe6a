//! End-to-end experiment runs: build the game, drive the round loop with
//! routed learners, measure, and write traces and summaries.

mod config;
mod output;
mod sweep;

use thiserror::Error;

pub use config::{
    ContextProcess, EtaMode, EtaSetting, GameConfig, RunConfig, Sweep, SweepAxis, SCHEMA_VERSION,
};
pub use output::{
    aggregate_block, config_echo, sig12, summary_header, summary_row, trace_csv, write_atomic,
    AGGREGATE_HEADER,
};
pub use sweep::{run_sweep, sweep_cells, SweepCell, SweepOutcome};

use std::path::Path;

use crate::game::{self, GameSpec};
use crate::learning::{iso_grpo_round, LearnerBank};
use crate::metrics::{self, compute_run_metrics, RoundRecord, RunMetrics, Trace};
use crate::prediction::{predict, MistakeLedger, PredictorConfig, PredictorKind};
use crate::rng;

/// Largest allowed gap between a stored loss and its recomputation.
pub const SELF_CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Runtime(_) => 2,
            HarnessError::Io(_) => 3,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

/// Raw product of one simulated run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trace: Trace,
    pub ledger: MistakeLedger,
    pub bank: LearnerBank,
}

/// Plays `contexts.len()` rounds of routed optimistic Hedge.
///
/// `predictors` must hold one entry per player. With `shared_stream`, every
/// player's noisy predictor draws from the stream of player 0.
pub fn simulate(
    spec: &GameSpec,
    contexts: &[usize],
    predictors: &[PredictorConfig],
    shared_stream: bool,
    eta: f64,
) -> Result<Simulation, HarnessError> {
    let players = spec.num_players();
    let m = spec.num_contexts();
    let horizon = contexts.len();
    if predictors.len() != players {
        return Err(HarnessError::Config(format!(
            "predictors: {} entries for {players} players",
            predictors.len()
        )));
    }
    for (j, p) in predictors.iter().enumerate() {
        p.validate(m, horizon)
            .map_err(|e| HarnessError::Config(format!("predictors[{j}]: {e}")))?;
    }
    let mut bank =
        LearnerBank::for_game(spec, eta).map_err(|e| HarnessError::Config(format!("eta: {e}")))?;
    let mut ledger = MistakeLedger::new(horizon, players);
    let mut trace = Trace::new(players, spec.num_actions(), m, horizon);
    let mut predictions = vec![0; players];
    for (t, &z) in contexts.iter().enumerate() {
        for (j, config) in predictors.iter().enumerate() {
            let stream = if shared_stream { 0 } else { j };
            predictions[j] = predict(config, m, stream, t, z, &contexts[..t]).map_err(runtime)?;
            ledger.record(t, j, predictions[j], z).map_err(runtime)?;
        }
        let outcome = iso_grpo_round(&mut bank, &predictions, z, spec).map_err(runtime)?;
        trace
            .push(RoundRecord {
                round: t,
                realized_context: z,
                predictions: predictions.clone(),
                strategies: outcome.profile,
                losses: outcome.losses,
            })
            .map_err(runtime)?;
    }
    Ok(Simulation {
        trace,
        ledger,
        bank,
    })
}

/// Largest `|ℓ_stored - ℓ_recomputed|` over the trace.
pub fn self_consistency_gap(spec: &GameSpec, trace: &Trace) -> Result<f64, HarnessError> {
    let mut worst: f64 = 0.0;
    for r in trace.records() {
        for j in 0..spec.num_players() {
            let again = game::loss_vector_in_profile(spec, j, &r.strategies, r.realized_context)
                .map_err(runtime)?;
            for (a, b) in again.values().iter().zip(r.losses[j].values()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}

/// Result of one configured run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_id: String,
    pub seed: u64,
    pub noise: f64,
    pub spec: GameSpec,
    pub contexts: Vec<usize>,
    pub trace: Trace,
    pub metrics: RunMetrics,
    /// The `η = 1` pass when the step size came from the rule.
    pub pilot: Option<Box<RunResult>>,
}

impl RunResult {
    pub fn eta(&self) -> f64 {
        self.metrics.eta
    }
}

/// Per-player predictors for `seed`, with noisy seeds keyed by the run seed.
fn seeded_predictors(
    config: &RunConfig,
    players: usize,
    seed: u64,
) -> Result<Vec<PredictorConfig>, HarnessError> {
    Ok(config
        .player_predictors(players)?
        .into_iter()
        .map(|mut p| {
            if matches!(p.kind, PredictorKind::Noisy { .. }) {
                p.seed = rng::mix(p.seed, seed);
            }
            p
        })
        .collect())
}

/// Runs `config` for `seed` in memory.
pub fn execute(config: &RunConfig, seed: u64, run_id: &str) -> Result<RunResult, HarnessError> {
    config.validate()?;
    let spec = config.build_game(seed)?;
    let predictors = seeded_predictors(config, spec.num_players(), seed)?;
    let contexts = config
        .context_process
        .generate(spec.num_contexts(), config.horizon, seed)?;
    let noise = config.predictors[0].noise();
    let finish =
        |sim: Simulation, eta: f64, run_id: String, pilot| -> Result<RunResult, HarnessError> {
            let gap = self_consistency_gap(&spec, &sim.trace)?;
            if gap > SELF_CONSISTENCY_TOL {
                return Err(HarnessError::Runtime(format!(
                    "stored losses differ from recomputation by {gap}"
                )));
            }
            let metrics = compute_run_metrics(&sim.trace, eta).map_err(runtime)?;
            Ok(RunResult {
                run_id,
                seed,
                noise,
                spec: spec.clone(),
                contexts: contexts.clone(),
                trace: sim.trace,
                metrics,
                pilot,
            })
        };
    match config.eta {
        EtaSetting::Fixed(eta) => {
            let sim = simulate(
                &spec,
                &contexts,
                &predictors,
                config.shared_prediction_stream,
                eta,
            )?;
            finish(sim, eta, run_id.to_string(), None)
        }
        EtaSetting::Mode(EtaMode::Rule) => {
            let sim = simulate(
                &spec,
                &contexts,
                &predictors,
                config.shared_prediction_stream,
                1.0,
            )?;
            let pilot = finish(sim, 1.0, format!("{run_id}-pilot"), None)?;
            let eta = pilot
                .metrics
                .players
                .iter()
                .map(|p| {
                    metrics::eta_rule(
                        spec.num_contexts(),
                        spec.num_actions(),
                        p.mistakes,
                        p.variation.iter().sum(),
                    )
                })
                .fold(1.0, f64::min);
            let sim = simulate(
                &spec,
                &contexts,
                &predictors,
                config.shared_prediction_stream,
                eta,
            )?;
            finish(sim, eta, run_id.to_string(), Some(Box::new(pilot)))
        }
    }
}

/// Run id used for a single run.
pub fn single_run_id(seed: u64) -> String {
    format!("s{seed}")
}

/// Executes one run and writes `trace_<id>.csv`, `summary.csv` and
/// `config_echo.toml` into `out_dir`.
pub fn run_single(
    config: &RunConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<RunResult, HarnessError> {
    let result = execute(config, seed, &single_run_id(seed))?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut summary = summary_header(result.spec.num_players(), result.spec.num_contexts());
    let mut runs: Vec<&RunResult> = Vec::new();
    if let Some(pilot) = &result.pilot {
        runs.push(pilot);
    }
    runs.push(&result);
    for r in runs {
        write_atomic(
            &out_dir.join(format!("trace_{}.csv", r.run_id)),
            &trace_csv(r),
        )?;
        summary.push_str(&summary_row(r));
    }
    write_atomic(&out_dir.join("summary.csv"), &summary)?;
    write_atomic(&out_dir.join("config_echo.toml"), &config_echo(config))?;
    Ok(result)
}
