use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iso_core::game::{self, GameSpec, JointProfile, MixedStrategy};
use iso_core::generators;
use iso_core::harness::{self, HarnessError, RunConfig};
use iso_core::metrics;
use iso_core::oracle::{self, OracleRound, SmallInstanceLimit};

#[derive(Parser)]
#[command(
    name = "iso",
    version,
    about = "Context-routed optimistic Hedge experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write its trace, summary and config echo.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the first seed listed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute every (sweep value, seed) cell of the configured sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for cells; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Check a run config or a game spec file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare primary computations against brute-force oracles.
    #[command(hide = true)]
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out),
        Command::Sweep {
            config,
            out,
            threads,
        } => cmd_sweep(&config, out, threads),
        Command::Validate { config, seed } => cmd_validate(&config, seed),
        Command::OracleCheck { instances, seed } => cmd_oracle_check(instances, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_run(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), HarnessError> {
    let config = RunConfig::load(path)?;
    let seed = seed.unwrap_or(config.seeds[0]);
    let out = out.unwrap_or_else(|| config.output.clone());
    let result = harness::run_single(&config, seed, &out)?;
    let m = &result.metrics;
    println!(
        "run {} eta={} cce_epsilon={} bound_rhs={}",
        result.run_id,
        harness::sig12(m.eta),
        harness::sig12(m.cce.epsilon),
        harness::sig12(m.cce.bound_rhs)
    );
    for (j, p) in m.players.iter().enumerate() {
        println!(
            "  player {j}: L_T={} regret={} bound={} slack2_bound={}",
            p.mistakes,
            harness::sig12(p.contextual_regret),
            harness::sig12(p.bound.total),
            harness::sig12(p.bound.total_slack2)
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_sweep(path: &Path, out: Option<PathBuf>, threads: usize) -> Result<(), HarnessError> {
    let config = RunConfig::load(path)?;
    let out = out.unwrap_or_else(|| config.output.clone());
    let outcome = harness::run_sweep(&config, threads)?;
    outcome.write(&config, &out)?;
    let failed = outcome.failures().count();
    println!(
        "{} cells, {failed} failed; wrote {}",
        outcome.cells.len(),
        out.display()
    );
    if failed > 0 {
        let (cell, err) = outcome.failures().next().expect("at least one failure");
        return Err(HarnessError::Runtime(format!(
            "{failed} cell(s) failed, first {}: {err}",
            cell.run_id
        )));
    }
    Ok(())
}

fn cmd_validate(path: &Path, seed: u64) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let is_run_config = text
        .lines()
        .any(|l| l.trim_start().starts_with("schema_version"));
    let spec = if is_run_config {
        let config = RunConfig::load(path)?;
        let spec = config.build_game(seed)?;
        config.player_predictors(spec.num_players())?;
        config
            .context_process
            .generate(spec.num_contexts(), config.horizon, seed)?;
        spec
    } else {
        GameSpec::from_toml_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?
    };
    println!(
        "ok: {} players, {} actions, dim {}, {} contexts; all costs within [-1, 1]",
        spec.num_players(),
        spec.num_actions(),
        spec.feature_dim(),
        spec.num_contexts()
    );
    Ok(())
}

fn random_profile(rng: &mut ChaCha8Rng, players: usize, actions: usize) -> JointProfile {
    JointProfile::new(
        (0..players)
            .map(|_| {
                let raw: Vec<f64> = (0..actions).map(|_| rng.random::<f64>() + 1e-3).collect();
                let s: f64 = raw.iter().sum();
                MixedStrategy::new(raw.iter().map(|x| x / s).collect()).expect("normalized")
            })
            .collect(),
    )
}

fn cmd_oracle_check(instances: usize, seed: u64) -> Result<(), HarnessError> {
    let rt = |e: &dyn std::fmt::Display| HarnessError::Runtime(e.to_string());
    let limit = SmallInstanceLimit::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut cost_gap, mut grid_gap, mut cce_gap) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..instances {
        let players = rng.random_range(2..=3);
        let actions = rng.random_range(2..=4);
        let dim = rng.random_range(1..=5);
        let contexts = rng.random_range(1..=3);
        let spec = generators::random_bilinear(players, actions, dim, contexts, rng.random())
            .map_err(|e| rt(&e))?;
        let profile = random_profile(&mut rng, players, actions);
        let player = rng.random_range(0..players);
        let z = rng.random_range(0..contexts);
        let primary = game::expected_cost(&spec, player, &profile, z).map_err(|e| rt(&e))?;
        let raw: Vec<Vec<f64>> = profile
            .strategies()
            .iter()
            .map(|s| s.probs().to_vec())
            .collect();
        let brute = oracle::brute_expected_cost(
            actions,
            spec.player_features(player),
            spec.context(z),
            &raw,
            limit,
        )
        .map_err(|e| rt(&e))?;
        cost_gap = cost_gap.max((primary - brute).abs());

        let horizon = rng.random_range(1..=64);
        let contexts_seq: Vec<usize> = (0..horizon)
            .map(|_| rng.random_range(0..contexts))
            .collect();
        let predictors = vec![iso_core::PredictorConfig::oracle(); players];
        let sim = harness::simulate(
            &spec,
            &contexts_seq,
            &predictors,
            false,
            rng.random_range(0.05..=1.0),
        )?;
        let rounds: Vec<OracleRound> = sim
            .trace
            .records()
            .iter()
            .map(|r| OracleRound {
                context: r.realized_context,
                strategies: r
                    .strategies
                    .strategies()
                    .iter()
                    .map(|s| s.probs().to_vec())
                    .collect(),
                losses: r.losses.iter().map(|l| l.values().to_vec()).collect(),
            })
            .collect();
        let in_ctx: Vec<Vec<f64>> = rounds
            .iter()
            .filter(|r| r.context == z)
            .map(|r| r.losses[player].clone())
            .collect();
        let (_, grid_value) =
            oracle::grid_comparator(&in_ctx, actions, 0.01, limit).map_err(|e| rt(&e))?;
        let comparator =
            metrics::best_per_context_comparator(&sim.trace, player, z).map_err(|e| rt(&e))?;
        let vertex_value: f64 = in_ctx.iter().map(|l| comparator.dot(l)).sum();
        grid_gap = grid_gap.max((grid_value - vertex_value).abs());
        let eps = metrics::cce_epsilon(&sim.trace)
            .map_err(|e| rt(&e))?
            .epsilon;
        let brute_eps = oracle::exhaustive_cce_gap(&rounds, limit).map_err(|e| rt(&e))?;
        cce_gap = cce_gap.max((eps - brute_eps).abs());
    }
    println!("instances: {instances}");
    println!("max |expected_cost - brute|: {cost_gap:e}");
    println!("max |grid - vertex comparator value|: {grid_gap:e}");
    println!("max |cce_epsilon - exhaustive gap|: {cce_gap:e}");
    if cost_gap > 1e-12 || cce_gap > 1e-12 {
        return Err(HarnessError::Runtime("oracle disagreement".into()));
    }
    Ok(())
}
